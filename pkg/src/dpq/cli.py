"""Command-line entry points: `dpq run`, `dpq quantiles`, `dpq selftest`."""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import baselines, bench
from .core import RandomSource, jitter, prepare_dataset


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="dpq", description="Differentially private quantile estimation"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a benchmark config and write a CSV")
    run.add_argument("--config", required=True, help="key=value config file")
    run.add_argument("--out", default=None, help="output CSV path (overrides config)")

    one = sub.add_parser("quantiles", help="one-shot estimation from a CSV file")
    one.add_argument("--algorithm", required=True, choices=sorted(bench.ALGORITHMS))
    one.add_argument("--data", required=True, help="input CSV path")
    one.add_argument("--column", default="value", help="CSV column to read")
    one.add_argument("--divisor", type=float, default=1.0, help="value scale divisor")
    one.add_argument("--m", type=int, required=True, help="number of quantiles")
    one.add_argument("--epsilon", type=float, required=True)
    one.add_argument("--range", dest="data_range", default="-100,100",
                     help="data bounds as 'a,b'")
    one.add_argument("--seed", type=int, default=0)
    one.add_argument("--jitter", type=float, nargs="?", const=-1.0, default=0.0,
                     help="uniform perturbation half-width; bare flag uses "
                          "1e-9 * (b - a)")

    sub.add_parser("selftest", help="run the oracle-backed test subset")

    cal = sub.add_parser("calibrate",
                         help="regenerate the smooth-sensitivity tuning table")
    cal.add_argument("--out", required=True)
    cal.add_argument("--max-m", type=int, default=29)
    cal.add_argument("--epsilon", type=float, default=1.0)
    return parser


def _cmd_run(args):
    config = bench.load_config(args.config)
    out = args.out or config.out
    records = bench.run_experiment(config, out)
    print(f"wrote {len(records)} records to {out}")
    return 0


def _cmd_quantiles(args):
    a, b = (float(part) for part in args.data_range.split(","))
    values = bench.ingest_csv(args.data, args.column, args.divisor)
    rng = RandomSource(args.seed)
    dataset = prepare_dataset(values, a, b)
    if args.jitter:
        scale = 1e-9 * (b - a) if args.jitter < 0 else args.jitter
        dataset = jitter(dataset, scale, rng)
    spec = bench.evenly_spaced_quantiles(args.m, dataset.n)
    result = bench.estimate(args.algorithm, dataset, spec, args.epsilon, rng)
    for value in result.outputs:
        print(f"{value:.9g}")
    return 0


def _cmd_selftest():
    tests_dir = Path(__file__).resolve().parents[2] / "tests"
    if not tests_dir.is_dir():
        print("selftest needs the source checkout (tests/ not found)", file=sys.stderr)
        return 2
    import pytest

    return pytest.main(["-q", "-m", "oracle", str(tests_dir)])


def _cmd_calibrate(args):
    table = baselines.generate_calibration_table(args.max_m, args.epsilon)
    baselines.save_calibration(table, args.out)
    print(f"wrote {len(table)} tuning rows to {args.out}")
    return 0


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "quantiles":
        return _cmd_quantiles(args)
    if args.command == "selftest":
        return _cmd_selftest()
    return _cmd_calibrate(args)


if __name__ == "__main__":
    sys.exit(main())
