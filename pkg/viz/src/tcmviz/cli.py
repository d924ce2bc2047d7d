"""Command-line entry points for the figure tools.

Subcommands: plot-fields, plot-diagnostics, plot-convergence.
Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from tcmviz.plots import plot_convergence, plot_diagnostics, plot_fields
from tcmviz.readers import FormatError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="tcm-viz", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    pf = sub.add_parser("plot-fields", help="heatmaps from a snapshot")
    pf.add_argument("snapshot")
    pf.add_argument("--out", required=True, help="output directory")
    pf.add_argument("--fields", default=None,
                    help="comma-separated field names (default: all six)")
    pf.add_argument("--q-s", type=float, default=0.02,
                    help="saturation threshold for the humidity contour")

    pd = sub.add_parser("plot-diagnostics", help="time series from a CSV")
    pd.add_argument("csv")
    pd.add_argument("--out", required=True, help="output PNG path")
    pd.add_argument("--decay-rate", type=float, default=None,
                    help="overlay E(0) exp(-rate t) on the energy panel")
    pd.add_argument("--xi0", type=float, default=None,
                    help="reference line for the sup_T panel")

    pc = sub.add_parser("plot-convergence", help="log-log sweep differences")
    pc.add_argument("manifest")
    pc.add_argument("--out", required=True, help="output PNG path")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "plot-fields":
            fields = args.fields.split(",") if args.fields else None
            written = plot_fields(args.snapshot, args.out, fields, args.q_s)
            for path in written:
                print(path)
            return 0
        if args.command == "plot-diagnostics":
            dev = plot_diagnostics(args.csv, args.out, args.decay_rate, args.xi0)
            print(args.out)
            if dev is not None:
                print(f"decay-overlay max relative deviation: {dev:.3e}")
            return 0
        if args.command == "plot-convergence":
            print(plot_convergence(args.manifest, args.out))
            return 0
        raise AssertionError(f"unhandled command {args.command}")
    except (FormatError, ValueError, OSError) as exc:
        print(f"tcm-viz {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
