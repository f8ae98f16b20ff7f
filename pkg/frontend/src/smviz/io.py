"""Readers for the solver's published file formats.

These are independent implementations of the interface contracts:
  - trace CSV     header `t,E_tot,V,eta,K,<extras...>`, 17-digit floats
  - report CSV    `dt,err_u,err_E,order_u,order_E`
  - SMF1 snapshot magic "SMF1", u32 nx, u32 ny, f64 lx, f64 ly, row-major f64
  - manifest.json list of {path, t, field, min, max, mean}
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

SNAPSHOT_MAGIC = b"SMF1"


@dataclass
class Snapshot:
    nx: int
    ny: int
    lx: float
    ly: float
    values: np.ndarray  # shape (nx, ny), axis 0 is x


def read_snapshot(path) -> Snapshot:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"{path}: not an SMF1 snapshot (magic {magic!r})")
        nx, ny, lx, ly = struct.unpack("<IIdd", fh.read(24))
        data = np.frombuffer(fh.read(8 * nx * ny), dtype="<f8")
    if data.size != nx * ny:
        raise ValueError(f"{path}: truncated snapshot")
    return Snapshot(nx, ny, lx, ly, data.reshape(nx, ny).copy())


def snapshot_stats(path) -> dict:
    snap = read_snapshot(path)
    return {
        "min": float(snap.values.min()),
        "max": float(snap.values.max()),
        "mean": float(snap.values.mean()),
    }


def read_trace(path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[:5] != ["t", "E_tot", "V", "eta", "K"]:
            raise ValueError(f"{path}: not a trace CSV (header {header[:5]})")
        rows = [[float(v) for v in line.strip().split(",")]
                for line in fh if line.strip()]
    data = np.asarray(rows)
    return {name: data[:, i] for i, name in enumerate(header)}


def read_report(path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header != ["dt", "err_u", "err_E", "order_u", "order_E"]:
            raise ValueError(f"{path}: not a convergence report (header {header})")
        rows = []
        for line in fh:
            if not line.strip():
                continue
            cells = line.strip().split(",")
            rows.append([float(c) if c != "" else np.nan for c in cells])
    data = np.asarray(rows)
    return {name: data[:, i] for i, name in enumerate(header)}


def read_manifest(path) -> list[dict]:
    with open(path) as fh:
        entries = json.load(fh)
    if not isinstance(entries, list):
        raise ValueError(f"{path}: manifest must be a JSON list")
    return entries


def verify_manifest(path, tol: float = 1e-12) -> list[dict]:
    """Re-read every snapshot and compare its stats to the logged values.

    Returns one record per entry with the absolute deviations and an `ok`
    flag (deviation <= tol * max(1, |logged|), i.e. 1e-12 relative-or-absolute).
    """
    results = []
    for entry in read_manifest(path):
        stats = snapshot_stats(entry["path"])
        devs = {k: abs(stats[k] - entry[k]) for k in ("min", "max", "mean")}
        ok = all(d <= tol * max(1.0, abs(entry[k])) for k, d in devs.items())
        results.append({"path": entry["path"], "field": entry.get("field"),
                        "t": entry.get("t"), "deviations": devs, "ok": ok})
    return results
