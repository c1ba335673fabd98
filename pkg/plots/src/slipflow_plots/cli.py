"""slipflow-plot: render figures from slipflow CSV outputs.

    slipflow-plot series --in OUTDIR [CSV ...] --out FIGDIR
    slipflow-plot sweep  --in sweep.csv --out FIGDIR

Exits 1 on schema problems (missing columns, empty bodies); no image file
is written in that case.
"""

from __future__ import annotations

import argparse
import sys

from .figures import plot_series, plot_sweep
from .io import SchemaError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="slipflow-plot")
    sub = parser.add_subparsers(dest="command", required=True)
    ser = sub.add_parser("series", help="per-observable panels for a sweep")
    ser.add_argument("--in", dest="inputs", nargs="+", required=True,
                     help="series CSV files or a directory holding them")
    ser.add_argument("--out", required=True, help="figure output directory")
    ser.add_argument("--prefix", default="series")
    sw = sub.add_parser("sweep", help="scaling view of a sweep CSV")
    sw.add_argument("--in", dest="infile", required=True)
    sw.add_argument("--out", required=True)
    sw.add_argument("--name", default="sweep.png")
    try:
        args = parser.parse_args(argv)
    except SystemExit:
        return 1
    try:
        if args.command == "series":
            written = plot_series(args.inputs, args.out, prefix=args.prefix)
            for name, (path, n) in written.items():
                print(f"wrote {path} ({n} curves)")
        else:
            info = plot_sweep(args.infile, args.out, name=args.name)
            slope = ("no fit (need >= 3 viscosities)" if info["slope"] is None
                     else f"slope = {info['slope']:+.3f}")
            print(f"wrote {info['path']} ({info['n_points']} points, {slope})")
        return 0
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
