"""Brute-force reference implementations used only by the test suite.

Everything here scales exponentially (or worse) and exists to pin down the
exact behavior of the production code on small instances: full enumeration
of the interval-sequence sampling law, prefix-mass sums for the forward
table, exhaustive sensitivity checking, and naive matrix products.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from dpq.core import QuantileEstimates, SortedDataset
from dpq.jointexp import IntervalSequence, utility

MAX_SUPPORT = 10**6
MAX_TRIPLES = 10**6


def sequence_utility(seq, spec, n):
    """u(X, s) = -sum_j |(i_j - i_{j-1}) - n_j| with i_0 = 0, i_{m+1} = n."""
    padded = np.concatenate(([0], list(seq), [n]))
    return -float(np.sum(np.abs(np.diff(padded) - spec.gap_counts())))


def log_gamma_scale(seq):
    """ln of gamma(s): the product of factorials of repeat counts in s."""
    total = 0.0
    for _, group in itertools.groupby(seq):
        total += math.lgamma(len(list(group)) + 1)
    return total


@dataclass(frozen=True)
class ExactDistribution:
    support: list  # of index tuples, ordered lexicographically
    log_weights: np.ndarray  # unnormalized
    log_z: float

    def probabilities(self):
        return np.exp(self.log_weights - self.log_z)

    def as_dict(self):
        return dict(zip(self.support, self.probabilities()))


def enumerate_distribution(dataset, spec, params):
    """Exact unnormalized log weight of every nondecreasing sequence.

    weight(s) = exp(eps * u(X, s) / (2 * sensitivity))
                * prod_j width(i_j) / gamma(s).
    """
    n, m = dataset.n, spec.m
    if math.comb(n + m, m) > MAX_SUPPORT:
        raise ValueError("support too large to enumerate")
    widths = dataset.gap_widths()
    with np.errstate(divide="ignore"):
        log_widths = np.log(widths)
    support = []
    log_weights = []
    for seq in itertools.combinations_with_replacement(range(n + 1), m):
        lw = params.log_weight_scale * sequence_utility(seq, spec, n)
        lw += sum(log_widths[i] for i in seq)
        lw -= log_gamma_scale(seq)
        support.append(seq)
        log_weights.append(lw)
    log_weights = np.array(log_weights)
    finite = log_weights[np.isfinite(log_weights)]
    shift = finite.max()
    log_z = shift + math.log(math.fsum(math.exp(lw - shift) for lw in finite))
    return ExactDistribution(support, log_weights, log_z)


def brute_force_log_alpha(dataset, spec, params, j, i, k):
    """Prefix mass: sum over length-j sequences ending in exactly k copies
    of interval i of (1/gamma) * prod phi * prod tau, in log space."""
    n = dataset.n
    widths = dataset.gap_widths()
    targets = spec.gap_counts()
    scale = params.log_weight_scale
    total = []
    for prefix in itertools.combinations_with_replacement(range(n + 1), j):
        run = 0
        for value in reversed(prefix):
            if value != i:
                break
            run += 1
        if run != k:
            continue
        padded = [0] + list(prefix)
        lw = -scale * math.fsum(
            abs((padded[t] - padded[t - 1]) - targets[t - 1])
            for t in range(1, j + 1)
        )
        if any(widths[v] == 0 for v in prefix):
            continue  # zero-width interval: zero mass
        lw += math.fsum(math.log(widths[v]) for v in prefix)
        lw -= log_gamma_scale(prefix)
        total.append(lw)
    if not total:
        return -np.inf
    shift = max(total)
    return shift + math.log(math.fsum(math.exp(lw - shift) for lw in total))


def _multisets(universe, n):
    return itertools.combinations_with_replacement(universe, n)


def _swap_neighbors(values, universe):
    seen = set()
    for pos in range(len(values)):
        for replacement in universe:
            neighbor = tuple(sorted(values[:pos] + values[pos + 1:] + (replacement,)))
            if neighbor != values and neighbor not in seen:
                seen.add(neighbor)
                yield neighbor


def _add_neighbors(values, universe):
    seen = set()
    for extra in universe:
        neighbor = tuple(sorted(values + (extra,)))
        if neighbor not in seen:
            seen.add(neighbor)
            yield neighbor


def _utility_over_outputs(values, bounds, spec, outputs):
    dataset = SortedDataset(np.array(values, dtype=float), *bounds)
    return np.array(
        [utility(dataset, spec, QuantileEstimates(np.array(o))) for o in outputs]
    )


def sensitivity_exhaust(universe, n, spec_builder, neighbor_model,
                        output_grid=None, bounds=None):
    """Max |u(X, o) - u(X', o)| over all neighbor pairs and grid outputs.

    ``spec_builder(n)`` supplies the quantile spec for a dataset of size n
    (add/remove neighbors have different sizes, hence different gap
    targets). Outputs are nondecreasing m-tuples over ``output_grid``.
    """
    universe = tuple(sorted(universe))
    bounds = bounds or (min(universe), max(universe))
    output_grid = tuple(output_grid) if output_grid is not None else universe
    spec = spec_builder(n)
    outputs = list(itertools.combinations_with_replacement(output_grid, spec.m))

    datasets = list(_multisets(universe, n))
    neighbor_fn = _swap_neighbors if neighbor_model == "swap" else _add_neighbors
    total_neighbors = sum(
        1 for values in datasets for _ in neighbor_fn(values, universe)
    )
    if total_neighbors * len(outputs) > MAX_TRIPLES:
        raise ValueError("too many (X, X', o) triples to exhaust")

    worst = 0.0
    for values in datasets:
        base = _utility_over_outputs(values, bounds, spec, outputs)
        for neighbor in neighbor_fn(values, universe):
            if neighbor_model == "swap":
                other = _utility_over_outputs(neighbor, bounds, spec, outputs)
            else:
                other = _utility_over_outputs(
                    neighbor, bounds, spec_builder(n + 1), outputs
                )
            worst = max(worst, float(np.max(np.abs(base - other))))
    return worst


def naive_toeplitz_matvec(op, vec):
    """Dense O(rc) product used as the FFT oracle."""
    return op.dense() @ np.asarray(vec, dtype=float)


def naive_log_toeplitz_matvec(op, log_vec):
    """Row-wise log-sum-exp product: an independently shifted log matvec.

    Each output row is logsumexp(log T[row] + log v), with its own max
    shift, which keeps per-row precision regardless of the global spread.
    """
    log_vec = np.asarray(log_vec, dtype=float)
    rows = op.dense() + log_vec[None, :]
    out = np.full(rows.shape[0], -np.inf)
    for r in range(rows.shape[0]):
        finite = rows[r][np.isfinite(rows[r])]
        if finite.size:
            shift = finite.max()
            out[r] = shift + math.log(math.fsum(math.exp(x - shift) for x in finite))
    return out


def empirical_distribution(sampler, draws):
    """Counts sampler() results (index tuples) into a frequency dict."""
    counts = {}
    for _ in range(draws):
        seq = sampler()
        key = seq.as_tuple() if isinstance(seq, IntervalSequence) else tuple(seq)
        counts[key] = counts.get(key, 0) + 1
    return {key: value / draws for key, value in counts.items()}


def total_variation(exact, empirical):
    keys = set(exact) | set(empirical)
    return 0.5 * sum(abs(exact.get(k, 0.0) - empirical.get(k, 0.0)) for k in keys)
