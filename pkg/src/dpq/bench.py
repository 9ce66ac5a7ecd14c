"""Experiment harness: data sources, configs, trial execution, CSV output."""

import csv
import os
import tempfile
import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import baselines, jointexp
from .core import QuantileSpec, RandomSource, jitter, prepare_dataset
from .metrics import error_report, true_quantiles

CSV_HEADER = (
    "algorithm,dataset,n,m,epsilon,trial,misclassified_per_quantile,"
    "distance_per_quantile,wall_time_seconds"
)

GENERATED_DATASETS = ("gaussian", "uniform")
FILE_DATASETS = ("ratings", "pagecounts", "file")
# Column and divisor presets for the Goodreads-style datasets.
_FILE_PRESETS = {"ratings": ("rating", 1.0), "pagecounts": ("pages", 100.0)}


def gen_gaussian(n, rng, mean=0.0, sd=5.0):
    """n independent N(mean, sd) draws; two uniforms per value."""
    return mean + sd * rng.normal(n)


def gen_uniform(n, rng, lo=-5.0, hi=5.0):
    """n independent U[lo, hi) draws; one uniform per value."""
    return lo + (hi - lo) * rng.uniform(n)


def ingest_csv(path, column, scale_divisor=1.0):
    """Reads one numeric column from a headered CSV, dividing by the scaler.

    Rows whose value does not parse as a real number are skipped; a single
    warning reports how many were dropped.
    """
    if scale_divisor == 0:
        raise ValueError("scale_divisor must be nonzero")
    values = []
    skipped = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise ValueError(f"column {column!r} not found in {path}")
        for row in reader:
            try:
                values.append(float(row[column]) / scale_divisor)
            except (TypeError, ValueError):
                skipped += 1
    if skipped:
        warnings.warn(f"skipped {skipped} unparseable rows in {path}")
    if not values:
        raise ValueError(f"no parseable values in column {column!r} of {path}")
    return values


def evenly_spaced_quantiles(m, n):
    """The experiment protocol's targets q_j = j / (m + 1)."""
    if m < 1:
        raise ValueError("m must be at least 1")
    return QuantileSpec(np.arange(1, m + 1) / (m + 1), n)


def _run_jointexp(dataset, spec, epsilon, rng):
    params = jointexp.MechanismParams.for_spec(epsilon, spec)
    return jointexp.joint_exp(dataset, spec, params, rng)


ALGORITHMS = {
    "jointexp": _run_jointexp,
    "appindexp": baselines.app_ind_exp,
    "csmooth": baselines.csmooth,
    "aggtree": baselines.agg_tree,
}


def estimate(algorithm, dataset, spec, epsilon, rng):
    """Dispatches one mechanism call by name."""
    try:
        runner = ALGORITHMS[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}") from None
    return runner(dataset, spec, epsilon, rng)


@dataclass
class ExperimentConfig:
    """One benchmark run: an algorithm crossed with m values and trials."""

    algorithm: str
    dataset: str
    n: int = 1000
    m_range: tuple = (1,)
    epsilon: float = 1.0
    trials: int = 20
    seed: int = 0
    data_range: tuple = (-100.0, 100.0)
    metric: str = "misclassified"
    jitter: float = 0.0  # perturbation half-width; 0 disables, <0 means auto
    timing: bool = True  # when off, wall_time_seconds is written as 0
    data_file: str = ""
    data_column: str = ""
    scale_divisor: float = 1.0
    out: str = "results.csv"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.dataset not in GENERATED_DATASETS + FILE_DATASETS:
            raise ValueError(f"unknown dataset {self.dataset!r}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.m_range or any(m < 1 for m in self.m_range):
            raise ValueError("m_range entries must be at least 1")
        if self.metric not in ("misclassified", "distance"):
            raise ValueError(f"unknown metric {self.metric!r}")
        a, b = self.data_range
        if not a < b:
            raise ValueError("data range must satisfy a < b")
        if self.dataset in FILE_DATASETS and not self.data_file:
            raise ValueError(f"dataset {self.dataset!r} requires data_file")

    @property
    def default_jitter_scale(self):
        a, b = self.data_range
        return 1e-9 * (b - a)


def parse_m_range(text):
    """Parses '1-29', '1,2,5', or a mix of both into a sorted tuple."""
    values = set()
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            values.update(range(int(lo), int(hi) + 1))
        else:
            values.add(int(part))
    return tuple(sorted(values))


_BOOL_VALUES = {"on": True, "true": True, "1": True,
                "off": False, "false": False, "0": False}


def parse_config(text):
    """Parses the key=value config format ('#' starts a comment line)."""
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        fields[key] = value
    kwargs = {}
    for key, value in fields.items():
        if key in ("algorithm", "dataset", "metric", "data_file", "data_column", "out"):
            kwargs[key] = value
        elif key in ("n", "trials", "seed"):
            kwargs[key] = int(value)
        elif key in ("epsilon", "scale_divisor"):
            kwargs[key] = float(value)
        elif key == "jitter":
            # "auto" enables the default scale of 1e-9 * (b - a)
            kwargs[key] = -1.0 if value.lower() == "auto" else float(value)
        elif key == "timing":
            kwargs[key] = _BOOL_VALUES[value.lower()]
        elif key == "m_range":
            kwargs[key] = parse_m_range(value)
        elif key == "range":
            a, b = value.split(",")
            kwargs["data_range"] = (float(a), float(b))
        else:
            raise ValueError(f"unknown config key {key!r}")
    return ExperimentConfig(**kwargs)


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


@dataclass(frozen=True)
class ExperimentRecord:
    algorithm: str
    dataset: str
    n: int
    m: int
    epsilon: float
    trial: int
    misclassified_per_quantile: float
    distance_per_quantile: float
    wall_time_seconds: float

    def to_csv_row(self):
        return (
            f"{self.algorithm},{self.dataset},{self.n},{self.m},"
            f"{self.epsilon:.9g},{self.trial},"
            f"{self.misclassified_per_quantile:.9g},"
            f"{self.distance_per_quantile:.9g},"
            f"{self.wall_time_seconds:.9g}"
        )


def _load_pool(config):
    if config.dataset in GENERATED_DATASETS:
        return None
    if config.dataset in _FILE_PRESETS:
        column, divisor = _FILE_PRESETS[config.dataset]
    else:
        column, divisor = config.data_column, config.scale_divisor
    if not column:
        raise ValueError("file datasets need data_column")
    return np.asarray(ingest_csv(config.data_file, column, divisor))


def _draw_raw(config, pool, rng):
    if config.dataset == "gaussian":
        return gen_gaussian(config.n, rng)
    if config.dataset == "uniform":
        return gen_uniform(config.n, rng)
    # Resample n values from the ingested pool, with replacement.
    idx = (rng.uniform(config.n) * pool.size).astype(int)
    return pool[idx]


def _trial_dataset(config, pool, rng):
    a, b = config.data_range
    dataset = prepare_dataset(_draw_raw(config, pool, rng), a, b)
    if config.jitter:
        scale = config.default_jitter_scale if config.jitter < 0 else config.jitter
        dataset = jitter(dataset, scale, rng)
    return dataset


def run_experiment(config, out_path=None):
    """Runs every (m, trial) cell and writes the records as CSV.

    Trial i draws from its own stream seeded with seed + i, in fixed order:
    data generation, optional jitter, then the mechanism. Wall time covers
    the mechanism call only. The CSV is written to a temporary file and
    atomically renamed into place, so (config, seed) determines every byte
    (timing mode aside, since measured time is inherently run-dependent).
    """
    out_path = out_path or config.out
    pool = _load_pool(config)
    records = []
    for m in config.m_range:
        for trial in range(config.trials):
            rng = RandomSource(config.seed + trial)
            dataset = _trial_dataset(config, pool, rng)
            spec = evenly_spaced_quantiles(m, dataset.n)
            start = time.perf_counter()
            result = estimate(config.algorithm, dataset, spec, config.epsilon, rng)
            elapsed = time.perf_counter() - start
            report = error_report(dataset, true_quantiles(dataset, spec), result)
            records.append(
                ExperimentRecord(
                    algorithm=config.algorithm,
                    dataset=config.dataset,
                    n=dataset.n,
                    m=m,
                    epsilon=config.epsilon,
                    trial=trial,
                    misclassified_per_quantile=report.misclassified_per_quantile,
                    distance_per_quantile=report.distance_per_quantile,
                    wall_time_seconds=elapsed if config.timing else 0.0,
                )
            )
    write_records(records, out_path)
    return records


def write_records(records, out_path):
    """Writes the fixed-schema CSV atomically (temp file, then rename)."""
    directory = os.path.dirname(os.path.abspath(out_path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".csv.tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for record in records:
                fh.write(record.to_csv_row() + "\n")
        os.replace(tmp_path, out_path)
    except OSError as exc:
        os.unlink(tmp_path)
        raise OSError(f"failed writing results to {out_path}: {exc}") from exc
