"""viz command line: regenerate figures from solver outputs.

Usage:
  viz convergence study/convergence.csv -o orders.png
  viz trace run/trace.csv -o energy.png
  viz contour snap_a.smf snap_b.smf snap_c.smf -o vorticity.png --labels "T=0.8" "T=1.0" "T=1.2"
  viz roughness run/trace.csv -o roughness.png
  viz check-manifest run/manifest.json
"""

from __future__ import annotations

import argparse
import sys

from .io import verify_manifest
from .plots import KINDS, FigureSpec, plot


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="viz", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("kind", choices=list(KINDS) + ["check-manifest"])
    parser.add_argument("inputs", nargs="+", help="input files for the figure kind")
    parser.add_argument("-o", "--output", help="output image path (PNG)")
    parser.add_argument("--labels", nargs="*", default=[])
    parser.add_argument("--title", default=None)
    args = parser.parse_args(argv)

    try:
        if args.kind == "check-manifest":
            bad = 0
            for path in args.inputs:
                for rec in verify_manifest(path):
                    status = "ok" if rec["ok"] else "MISMATCH"
                    print(f"{status}: {rec['path']} (field {rec['field']}, t={rec['t']})")
                    bad += 0 if rec["ok"] else 1
            return 0 if bad == 0 else 1
        if not args.output:
            parser.error("figure kinds need -o/--output")
        spec = FigureSpec(kind=args.kind, inputs=list(args.inputs),
                          output=args.output, title=args.title,
                          labels=list(args.labels))
        out = plot(spec)
        print(f"wrote {out}")
        return 0
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
