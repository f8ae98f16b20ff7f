"""Figure regeneration for staggered-mesh solver outputs: convergence plots,
energy/eta traces, field contours, and roughness growth, read from the CSV,
manifest, and SMF1 snapshot formats the solver emits."""

from .io import read_manifest, read_report, read_snapshot, read_trace, snapshot_stats, verify_manifest
from .plots import DPI, KINDS, FigureSpec, plot

__all__ = [
    "DPI",
    "KINDS",
    "FigureSpec",
    "plot",
    "read_manifest",
    "read_report",
    "read_snapshot",
    "read_trace",
    "snapshot_stats",
    "verify_manifest",
]

__version__ = "0.1.0"
