"""Error metrics and the empirical-quantile convention used by experiments."""

from dataclasses import dataclass

import numpy as np

from .core import QuantileEstimates


@dataclass(frozen=True)
class ErrorReport:
    """Both benchmark error figures for one (truth, estimate) pair."""

    misclassified_total: int
    misclassified_per_quantile: float
    distance_per_quantile: float


def true_quantiles(dataset, spec):
    """Nearest-rank empirical quantiles: the order statistic at ceil(q * n).

    Nearest-rank keeps the misclassified-points metric integral and exactly
    attainable by an order statistic; ranks are clamped to [1, n].
    """
    if dataset.n < 1:
        raise ValueError("dataset must contain at least one value")
    ranks = np.ceil(spec.quantiles * dataset.n).astype(int)
    ranks = np.clip(ranks, 1, dataset.n)
    return QuantileEstimates(dataset.values[ranks - 1])


def misclassified(dataset, truth, estimates):
    """Counts data points falling between each true and estimated quantile.

    Per quantile this is |{x : min(o, o_hat) <= x < max(o, o_hat)}|, the
    same half-open counting the mechanism's utility uses; the total sums
    over quantiles. Symmetric in (truth, estimates).
    """
    if truth.m != estimates.m:
        raise ValueError("truth and estimates must have the same length")
    lo = np.minimum(truth.outputs, estimates.outputs)
    hi = np.maximum(truth.outputs, estimates.outputs)
    counts = np.searchsorted(dataset.values, hi, side="left") - np.searchsorted(
        dataset.values, lo, side="left"
    )
    return int(np.sum(counts))


def distance_error(truth, estimates):
    """Mean absolute componentwise difference ||o_hat - o||_1 / m."""
    if truth.m != estimates.m:
        raise ValueError("truth and estimates must have the same length")
    return float(np.mean(np.abs(truth.outputs - estimates.outputs)))


def error_report(dataset, truth, estimates):
    total = misclassified(dataset, truth, estimates)
    return ErrorReport(
        misclassified_total=total,
        misclassified_per_quantile=total / truth.m,
        distance_per_quantile=distance_error(truth, estimates),
    )
