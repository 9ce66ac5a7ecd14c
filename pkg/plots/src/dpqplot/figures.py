"""Turns benchmark result CSVs into the standard comparison figures.

Input files follow the fixed bench schema (one row per algorithm, dataset,
m, trial). Figures show one subplot per dataset and one line per algorithm:
mean error vs m on a log y-axis, or mean wall time vs m on a linear one.
"""

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

BENCH_COLUMNS = (
    "algorithm", "dataset", "n", "m", "epsilon", "trial",
    "misclassified_per_quantile", "distance_per_quantile", "wall_time_seconds",
)

# Fixed hash salt keeps SVG element ids reproducible across renders.
matplotlib.rcParams["svg.hashsalt"] = "dpqplot"


@dataclass(frozen=True)
class FigureSpec:
    """What to read, which column to aggregate, and where to render."""

    input_csvs: tuple
    metric: str
    output_path: str
    group_keys: tuple = ("dataset", "algorithm")
    y_scale: str = "log"
    band: bool = False  # shaded min/max range across trials

    def __post_init__(self):
        object.__setattr__(self, "input_csvs", tuple(self.input_csvs))
        if not self.input_csvs:
            raise ValueError("at least one input CSV is required")
        if self.y_scale not in ("log", "linear"):
            raise ValueError(f"unknown y scale {self.y_scale!r}")


def load_results(spec):
    """Reads and concatenates the inputs, validating the schema."""
    frames = []
    for path in spec.input_csvs:
        frame = pd.read_csv(path)
        for column in ("algorithm", "dataset", "m", "trial", spec.metric):
            if column not in frame.columns:
                raise ValueError(f"column {column!r} missing from {path}")
        frames.append(frame)
    data = pd.concat(frames, ignore_index=True)
    if data.empty:
        raise ValueError("input CSVs contain no data rows")
    return data


def _render(spec, y_label):
    data = load_results(spec)
    datasets = sorted(data["dataset"].unique())
    fig, axes = plt.subplots(
        1, len(datasets), figsize=(4.5 * len(datasets), 3.6),
        squeeze=False, sharey=True,
    )
    for ax, dataset in zip(axes[0], datasets):
        subset = data[data["dataset"] == dataset]
        for algorithm, group in sorted(subset.groupby("algorithm")):
            stats = group.groupby("m")[spec.metric].agg(["mean", "min", "max"])
            ax.plot(stats.index, stats["mean"], marker="o", markersize=3,
                    label=algorithm)
            if spec.band:
                ax.fill_between(stats.index, stats["min"], stats["max"],
                                alpha=0.15)
        ax.set_yscale(spec.y_scale)
        ax.set_xlabel("# quantiles m")
        ax.set_title(dataset)
        ax.grid(True, alpha=0.3)
    axes[0][0].set_ylabel(y_label)
    axes[0][-1].legend(fontsize=8)
    fig.tight_layout()
    paths = _save(fig, spec.output_path)
    return fig, paths


def _save(fig, output_path):
    """Writes PNG plus an SVG sibling; both byte-stable across renders."""
    base, dot, ext = output_path.rpartition(".")
    if not dot:
        base, ext = output_path, "png"
    paths = []
    for suffix in dict.fromkeys([ext.lower(), "png", "svg"]):
        path = f"{base}.{suffix}"
        fig.savefig(path, dpi=120, metadata={"Date": None})
        paths.append(path)
    plt.close(fig)
    return paths


def plot_error(spec):
    """Mean error vs m, one line per algorithm, one subplot per dataset.

    Returns (figure, written paths). The y-axis defaults to log scale since
    the algorithms differ by orders of magnitude.
    """
    return _render(spec, spec.metric.replace("_", " "))


def plot_time(spec):
    """Mean mechanism wall time vs m, same layout as the error figure."""
    if spec.metric != "wall_time_seconds":
        spec = FigureSpec(spec.input_csvs, "wall_time_seconds", spec.output_path,
                          spec.group_keys, spec.y_scale, spec.band)
    return _render(spec, "wall time (s)")
