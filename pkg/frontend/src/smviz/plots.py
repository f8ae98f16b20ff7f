"""Figure regeneration from solver outputs.

Four figure families cover the benchmark plots: log-log convergence with a
slope-2 guide, energy/eta traces, field contour panels (levels symmetric
about 0 for sign-changing fields like vorticity and Laplacians), and log-log
roughness growth with the fitted slope annotated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import read_report, read_snapshot, read_trace

DPI = 150
KINDS = ("convergence", "trace", "contour", "roughness")


@dataclass
class FigureSpec:
    kind: str
    inputs: list[str]
    output: str
    title: str | None = None
    labels: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; choose from {KINDS}")
        if not self.inputs:
            raise ValueError("figure needs at least one input file")


def _save(fig, spec: FigureSpec) -> str:
    if spec.title:
        fig.suptitle(spec.title)
    fig.savefig(spec.output, dpi=DPI, metadata={"Software": "smviz"})
    plt.close(fig)
    return spec.output


def _plot_convergence(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    guide_anchor = None
    for i, path in enumerate(spec.inputs):
        rep = read_report(path)
        label = spec.labels[i] if i < len(spec.labels) else f"series {i + 1}"
        ax.loglog(rep["dt"], rep["err_u"], "o-", label=f"{label}: u")
        ax.loglog(rep["dt"], rep["err_E"], "s--", label=f"{label}: E")
        if guide_anchor is None:
            guide_anchor = (rep["dt"], rep["err_u"])
    dts, errs = guide_anchor
    ref = errs[0] * (dts / dts[0]) ** 2
    ax.loglog(dts, ref, "k:", linewidth=1.2, label="slope 2")
    ax.set_xlabel("time step")
    ax.set_ylabel("error at T")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, spec)


def _plot_trace(spec: FigureSpec):
    fig, (ax_e, ax_eta) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    for i, path in enumerate(spec.inputs):
        tr = read_trace(path)
        label = spec.labels[i] if i < len(spec.labels) else f"run {i + 1}"
        ax_e.plot(tr["t"], tr["E_tot"], label=label)
        ax_eta.plot(tr["t"], tr["eta"], label=label)
    ax_e.set_xlabel("t")
    ax_e.set_ylabel("total energy")
    ax_eta.set_xlabel("t")
    ax_eta.set_ylabel("eta")
    ax_eta.axhline(1.0, color="k", linewidth=0.6, alpha=0.5)
    for ax in (ax_e, ax_eta):
        ax.grid(True, alpha=0.3)
    if len(spec.inputs) > 1 or spec.labels:
        ax_e.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, spec)


def _plot_contour(spec: FigureSpec):
    n = len(spec.inputs)
    fig, axes = plt.subplots(1, n, figsize=(3.6 * n, 3.4), squeeze=False)
    for ax, path, i in zip(axes[0], spec.inputs, range(n)):
        snap = read_snapshot(path)
        x = np.arange(snap.nx) * snap.lx / snap.nx
        y = np.arange(snap.ny) * snap.ly / snap.ny
        vals = snap.values
        lo, hi = float(vals.min()), float(vals.max())
        if lo < 0.0 < hi:
            # sign-changing fields (vorticity, Laplacians) get symmetric levels
            amp = max(abs(lo), abs(hi))
            levels = np.linspace(-amp, amp, 21)
            cmap = "RdBu_r"
        else:
            levels = np.linspace(lo, hi, 21) if hi > lo else None
            cmap = "viridis"
        # transpose: array axis 0 is x, imshow/contour expect rows = y
        cs = ax.contourf(x, y, vals.T, levels=levels, cmap=cmap)
        ax.set_aspect("equal")
        ax.set_xlabel("x")
        if i == 0:
            ax.set_ylabel("y")
        if i < len(spec.labels):
            ax.set_title(spec.labels[i], fontsize=9)
        fig.colorbar(cs, ax=ax, shrink=0.85)
    fig.tight_layout()
    return _save(fig, spec)


def _plot_roughness(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    for i, path in enumerate(spec.inputs):
        tr = read_trace(path)
        if "W" not in tr:
            raise ValueError(f"{path}: trace has no roughness column W")
        keep = (tr["t"] > 0) & (tr["W"] > 0)
        t, w = tr["t"][keep], tr["W"][keep]
        label = spec.labels[i] if i < len(spec.labels) else f"run {i + 1}"
        slope = np.polyfit(np.log(t), np.log(w), 1)[0]
        ax.loglog(t, w, label=f"{label} (slope {slope:.2f})")
    ax.set_xlabel("t")
    ax.set_ylabel("roughness W(t)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, spec)


_PLOTTERS = {
    "convergence": _plot_convergence,
    "trace": _plot_trace,
    "contour": _plot_contour,
    "roughness": _plot_roughness,
}


def plot(spec: FigureSpec) -> str:
    """Render the figure and return the output path."""
    return _PLOTTERS[spec.kind](spec)
