"""Command-line interface: run simulations, convergence studies, and presets.

Configs are JSON documents mirroring ExperimentSpec; unknown keys are
rejected.  Flags override config keys, and ``--set a.b=value`` assigns any
dotted path (values parse as JSON literals, falling back to strings).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

from .harness import ExperimentSpec, convergence_study, presets, run
from .integrators import BlowUpError, SMConfig

_TOP_KEYS = {
    "name", "model", "grid", "scheme", "scheme_config", "t_final", "initial",
    "dt_list", "reference_dt", "seed", "trace_stride", "snapshot_times",
    "snapshot_fields", "out_dir",
}
_SCHEME_KEYS = {
    "dt", "variant", "chi_kind", "theta", "c0", "s_stab", "c_star",
    "eta_placement", "bdf_order", "cn_modified", "chi2_base",
}


def spec_from_dict(doc: dict) -> ExperimentSpec:
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ValueError(f"unknown config key(s): {sorted(unknown)}")
    for key in ("model", "grid", "scheme", "scheme_config", "t_final", "initial"):
        if key not in doc:
            raise ValueError(f"missing config key: {key}")
    model = dict(doc["model"])
    kind = model.pop("kind", None)
    if kind is None:
        raise ValueError("missing config key: model.kind")
    sc = dict(doc["scheme_config"])
    unknown = set(sc) - _SCHEME_KEYS
    if unknown:
        raise ValueError(f"unknown scheme_config key(s): {sorted(unknown)}")
    if "dt" not in sc:
        raise ValueError("missing config key: scheme_config.dt")
    return ExperimentSpec(
        name=doc.get("name", "run"),
        model_kind=kind,
        model_params=model,
        grid=dict(doc["grid"]),
        scheme=doc["scheme"],
        config=SMConfig(**sc),
        t_final=float(doc["t_final"]),
        initial=dict(doc["initial"]),
        dt_list=doc.get("dt_list"),
        reference_dt=doc.get("reference_dt"),
        seed=int(doc.get("seed", 0)),
        trace_stride=int(doc.get("trace_stride", 1)),
        snapshot_times=list(doc.get("snapshot_times", [])),
        snapshot_fields=list(doc.get("snapshot_fields", [])),
        out_dir=doc.get("out_dir"),
    )


def spec_to_dict(spec: ExperimentSpec) -> dict:
    return {
        "name": spec.name,
        "model": {"kind": spec.model_kind, **spec.model_params},
        "grid": dict(spec.grid),
        "scheme": spec.scheme,
        "scheme_config": asdict(spec.config),
        "t_final": spec.t_final,
        "initial": dict(spec.initial),
        "dt_list": spec.dt_list,
        "reference_dt": spec.reference_dt,
        "seed": spec.seed,
        "trace_stride": spec.trace_stride,
        "snapshot_times": list(spec.snapshot_times),
        "snapshot_fields": list(spec.snapshot_fields),
        "out_dir": spec.out_dir,
    }


def _parse_literal(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_dotted(doc: dict, path: str, value) -> None:
    keys = path.split(".")
    node = doc
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            node[k] = {}
        node = node[k]
    node[keys[-1]] = value


def _apply_overrides(doc: dict, args) -> dict:
    for item in args.set or []:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form key=value")
        path, _, raw = item.partition("=")
        _apply_dotted(doc, path.strip(), _parse_literal(raw.strip()))
    if args.out is not None:
        doc["out_dir"] = args.out
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.dt is not None:
        doc.setdefault("scheme_config", {})["dt"] = args.dt
    if args.grid is not None:
        doc.setdefault("grid", {})["nx"] = args.grid
        doc["grid"]["ny"] = args.grid
    return doc


def _summarize_run(trace) -> str:
    last = trace.rows[-1]
    cols = trace.columns
    return (f"completed {len(trace.rows)} trace rows; final t = {last[cols.index('t')]:g}, "
            f"E_tot = {last[cols.index('E_tot')]:.9g}, V = {last[cols.index('V')]:.9g}")


def _summarize_report(report) -> str:
    parts = [f"{k}: final order {v:.3f}" for k, v in report.final_order.items()
             if k not in ("max_eta_dev",)]
    return "; ".join(parts)


def cmd_run(doc: dict) -> int:
    spec = spec_from_dict(doc)
    trace = run(spec)
    print(_summarize_run(trace))
    return 0


def cmd_converge(doc: dict) -> int:
    spec = spec_from_dict(doc)
    report = convergence_study(spec)
    print("dt, " + ", ".join(report.errors))
    for i, dt in enumerate(report.dts):
        print(f"{dt:.6g}: " + ", ".join(f"{report.errors[k][i]:.6e}" for k in report.errors))
    print(_summarize_report(report))
    return 0


def cmd_preset(name: str, args) -> int:
    catalog = presets(paper_scale=args.paper_scale)
    if name not in catalog:
        print(f"unknown preset {name!r}; run list-presets", file=sys.stderr)
        return 2
    doc = spec_to_dict(catalog[name])
    doc = _apply_overrides(doc, args)
    spec = spec_from_dict(doc)
    if spec.dt_list:
        report = convergence_study(spec)
        print(_summarize_report(report))
    else:
        trace = run(spec)
        print(_summarize_run(trace))
    return 0


def cmd_list_presets() -> int:
    for name in sorted(presets()):
        print(name)
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output directory", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--dt", type=float, default=None, help="override the time step")
    p.add_argument("--grid", type=int, default=None, help="override nx = ny")
    p.add_argument("--paper-scale", action="store_true",
                   help="use the full paper-scale grids and horizons")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a dotted config path, e.g. scheme_config.theta=0.5")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="smpde",
                                     description="staggered-mesh dissipative-PDE integrators")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one simulation from a JSON config")
    p_run.add_argument("config")
    _add_common(p_run)

    p_conv = sub.add_parser("converge", help="run a convergence study from a JSON config")
    p_conv.add_argument("config")
    _add_common(p_conv)

    p_preset = sub.add_parser("preset", help="run a named preset")
    p_preset.add_argument("name")
    _add_common(p_preset)

    sub.add_parser("list-presets", help="list available presets")

    args = parser.parse_args(argv)
    try:
        if args.command == "list-presets":
            return cmd_list_presets()
        if args.command == "preset":
            return cmd_preset(args.name, args)
        with open(args.config) as fh:
            doc = json.load(fh)
        doc = _apply_overrides(doc, args)
        if args.command == "run":
            return cmd_run(doc)
        return cmd_converge(doc)
    except (ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as err:
        # ArctanBranchError is a ValueError: branch violations exit with 2
        print(f"error: {err}", file=sys.stderr)
        return 2
    except BlowUpError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
