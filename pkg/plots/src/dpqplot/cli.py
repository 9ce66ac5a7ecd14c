"""`plot` command: render benchmark CSVs to comparison figures."""

import argparse
import sys

from .figures import FigureSpec, plot_error, plot_time


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="plot", description="Render dpq benchmark CSVs as figures"
    )
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        help="input results CSV (repeatable)")
    parser.add_argument("--metric", default="misclassified_per_quantile",
                        help="metric column to aggregate")
    parser.add_argument("--out", required=True, help="output image path (.png)")
    parser.add_argument("--kind", choices=("error", "time"), default="error")
    parser.add_argument("--yscale", choices=("log", "linear"), default=None,
                        help="default: log for error, linear for time")
    parser.add_argument("--band", action="store_true",
                        help="shade the min/max range across trials")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    y_scale = args.yscale or ("log" if args.kind == "error" else "linear")
    spec = FigureSpec(tuple(args.inputs), args.metric, args.out,
                      y_scale=y_scale, band=args.band)
    render = plot_error if args.kind == "error" else plot_time
    try:
        _, paths = render(spec)
    except (ValueError, OSError) as exc:
        print(f"plot: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
