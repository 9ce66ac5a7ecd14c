"""Joint exponential-mechanism release of m quantiles in a single draw.

The mechanism samples a nondecreasing sequence of m inter-point intervals
with probability proportional to

    exp(eps * u(X, s) / (2 * sensitivity)) * prod_j width(i_j) / gamma(s),

where u penalizes interval occupancy counts that miss their targets and
gamma(s) divides by k! for every interval repeated k times (the volume of the
ordered simplex). Sampling runs a forward dynamic program over prefix masses
alpha(j, i, k) -- "length-j prefixes ending in exactly k copies of interval
i" -- followed by backward sampling of (interval, run-length) pairs. The
forward k=1 row is a strictly-lower-triangular Toeplitz product, computed in
O(n log n) per level via the FFT; everything is kept in the log domain.

Total cost is O(m n log n + m^2 n) time.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import QuantileEstimates
from .numerics import (
    ToeplitzOperator,
    log_sum_exp_rows,
    log_toeplitz_matvec,
    racing_sample,
)

SWAP = "swap"
ADD_REMOVE = "add_remove"


def add_remove_sensitivity(spec):
    """Utility sensitivity under add/remove neighbors: 2*(1 - min gap)."""
    padded_q = np.concatenate(([0.0], spec.quantiles, [1.0]))
    return 2.0 * (1.0 - float(np.min(np.diff(padded_q))))


@dataclass(frozen=True)
class MechanismParams:
    """Privacy parameter and the utility sensitivity it is divided by.

    The swap neighbor model has sensitivity 2 regardless of how many
    quantiles are requested; add/remove is slightly tighter and depends on
    the smallest quantile gap, so use :meth:`for_spec` to derive it.
    """

    epsilon: float
    sensitivity: float = 2.0
    neighbor_model: str = SWAP

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.sensitivity <= 0:
            raise ValueError("sensitivity must be positive")
        if self.neighbor_model not in (SWAP, ADD_REMOVE):
            raise ValueError(f"unknown neighbor model {self.neighbor_model!r}")

    @classmethod
    def for_spec(cls, epsilon, spec, neighbor_model=SWAP):
        if neighbor_model == SWAP:
            return cls(epsilon, 2.0, SWAP)
        return cls(epsilon, add_remove_sensitivity(spec), ADD_REMOVE)

    @property
    def log_weight_scale(self):
        """Multiplier applied to utility inside the exponent: eps / (2*delta)."""
        return self.epsilon / (2.0 * self.sensitivity)


@dataclass(frozen=True)
class IntervalSequence:
    """Nondecreasing indices into the n+1 gaps between sorted data points."""

    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int)
        object.__setattr__(self, "indices", idx)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("indices must be a nonempty 1-d sequence")
        if idx[0] < 0 or np.any(np.diff(idx) < 0):
            raise ValueError("indices must be nonnegative and nondecreasing")

    def as_tuple(self):
        return tuple(int(i) for i in self.indices)


def utility(dataset, spec, estimates):
    """Occupancy utility u(X, o) = -sum_j |count(o_{j-1}, o_j) - n_j|.

    Sentinels o_0 = a and o_{m+1} = b + 1 close the partition; the +1 makes
    points equal to b count toward the final half-open interval. The result
    is <= 0 with equality iff every interval holds exactly its target mass.
    """
    o = estimates.outputs
    a, b = dataset.lower_bound, dataset.upper_bound
    if o[0] < a or o[-1] > b:
        raise ValueError("estimates must lie within the data bounds")
    edges = np.concatenate(([a], o, [b + 1.0]))
    below = np.searchsorted(dataset.values, edges, side="left")
    counts = np.diff(below)
    return -float(np.sum(np.abs(counts - spec.gap_counts())))


def log_phi(gap, j, params, spec):
    """log of the pairwise score phi: -eps * |gap - n_j| / (2 * sensitivity).

    ``gap`` is the index difference i' - i between consecutive sampled
    intervals; callers encode the infeasible i > i' case as -inf themselves.
    Accepts scalars or arrays.
    """
    target = spec.gap_counts()[j - 1]
    return -params.log_weight_scale * np.abs(np.asarray(gap, dtype=float) - target)


def log_tau(i, dataset):
    """log interval width ln(x_{i+1} - x_i); -inf for zero-width intervals."""
    padded = dataset.padded()
    with np.errstate(divide="ignore"):
        return float(np.log(padded[i + 1] - padded[i]))


def _log_tau_vector(dataset):
    with np.errstate(divide="ignore"):
        return np.log(dataset.gap_widths())


class LogAlphaTable:
    """Forward DP table of log alpha(j, i, k), stored compactly.

    Only the k = 1 slice is stored per level; runs of k > 1 copies of an
    interval differ from it by a closed-form factor,

        alpha(j, i, k) = alpha(j-k+1, i, 1) * tau(i)^{k-1}
                         * prod_{t=j-k+2..j} phi(i, i, t) / k!,

    since each extension of a run multiplies by tau(i) * phi(i, i, t) / k.
    :meth:`level_grid` materializes the (n+1, m) grid of (interval, run
    length) weights for one level, which is all backward sampling needs.
    This keeps the table at O(mn) floats, comfortably below the O(m^2 n)
    worst case, without changing any value.
    """

    def __init__(self, log_alpha_first, hat_entries, log_tau_vec, diag_phi_prefix):
        self.log_alpha_first = log_alpha_first  # (m, n+1); row j-1 is alpha(j, ., 1)
        self.hat_entries = hat_entries  # (m, n+1); row j-1 is log sum_k alpha(j, ., k)
        self.log_tau_vec = log_tau_vec
        self.diag_phi_prefix = diag_phi_prefix  # prefix sums of log phi(i, i, j) over j
        self.m, width = log_alpha_first.shape
        self.n = width - 1
        self._log_factorial = np.array([math.lgamma(k + 1) for k in range(self.m + 1)])

    def level_grid(self, j, out=None):
        """(n+1, m) array of log alpha(j, i, k); column k-1 holds run length k.

        ``out`` lets hot loops reuse one scratch buffer.
        """
        if out is None:
            out = np.empty((self.n + 1, self.m))
        k_max = min(j, self.m)
        ks = np.arange(1, k_max + 1)
        # alpha(j,.,k) = alpha(j-k+1,.,1) * tau^(k-1) * prod diag phi / k!;
        # rows j-1 .. j-k_max of the k=1 slice become columns k=1..k_max.
        with np.errstate(invalid="ignore"):  # 0 * -inf in the k=1 column
            run = self.log_tau_vec[:, None] * (ks - 1)[None, :]
        run[:, 0] = 0.0  # k=1 has no extra tau factor
        const = (
            self.diag_phi_prefix[j] - self.diag_phi_prefix[j - ks + 1]
        ) - self._log_factorial[ks]
        np.add(self.log_alpha_first[j - k_max : j][::-1].T, run, out=out[:, :k_max])
        out[:, :k_max] += const[None, :]
        out[:, k_max:] = -np.inf
        return out

    def dense(self):
        """Full (m, n+1, m) table; for inspection and small-instance tests."""
        return np.stack([self.level_grid(j) for j in range(1, self.m + 1)])


def forward_pass(dataset, spec, params):
    """Runs the forward recursion and returns the populated LogAlphaTable."""
    n, m = dataset.n, spec.m
    targets = spec.gap_counts()  # n_j at index j-1
    scale = params.log_weight_scale
    log_tau_vec = _log_tau_vector(dataset)

    log_alpha_first = np.full((m, n + 1), -np.inf)
    hat = np.full((m, n + 1), -np.inf)

    # phi(i, i, j) has gap 0, so its log is -scale * n_j, independent of i.
    diag_phi = -scale * targets[:m]
    diag_phi_prefix = np.concatenate(([0.0], np.cumsum(diag_phi)))

    log_alpha_first[0] = -scale * np.abs(np.arange(n + 1) - targets[0]) + log_tau_vec
    table = LogAlphaTable(log_alpha_first, hat, log_tau_vec, diag_phi_prefix)
    hat[0] = log_alpha_first[0]

    scratch = np.empty((n + 1, m)) if m > 1 else None
    first_row = np.full(n + 1, -np.inf)
    for j in range(2, m + 1):
        # Strictly-lower-triangular Toeplitz: row i, column i' holds
        # phi(i', i, j) for i' < i and zero elsewhere (diagonal dropped so a
        # run of repeats is never double counted against the k > 1 branch).
        diffs = -scale * np.abs(np.arange(1, n + 1) - targets[j - 1])
        first_column = np.concatenate(([-np.inf], diffs))
        op = ToeplitzOperator(first_column, first_row)
        log_alpha_first[j - 1] = log_tau_vec + log_toeplitz_matvec(op, hat[j - 2])
        hat[j - 1] = log_sum_exp_rows(table.level_grid(j, out=scratch))
    return table


def backward_sample(table, dataset, spec, params, rng):
    """Samples an interval sequence from the exact mechanism law.

    Walks the table back from level m, at each step racing over the flat
    (n+1) x m grid of (interval, run length) pairs weighted by
    alpha(j, i, k) * phi(i, next_interval, j+1); -inf marks infeasible pairs
    (k > j, or i not below the previously sampled interval). The first step
    allows i equal to the sentinel n; later steps are strictly decreasing
    because the run length already accounts for all repeats of an interval.
    """
    m, n = table.m, table.n
    if spec.m != m or dataset.n != n:
        raise ValueError("table does not match dataset/spec")
    targets = spec.gap_counts()
    scale = params.log_weight_scale

    indices = np.empty(m, dtype=int)
    weights = np.empty((n + 1, m))
    j = m
    upper = n  # i_{j+1}, initially the sentinel i_{m+1} = n
    first_step = True
    while j > 0:
        limit = upper + 1 if first_step else upper  # candidates i < limit
        if limit <= 0:
            raise RuntimeError("backward sampling reached an unsatisfiable state")
        table.level_grid(j, out=weights)
        gaps_to_upper = upper - np.arange(limit)
        weights[:limit] += (-scale * np.abs(gaps_to_upper - targets[j]))[:, None]
        weights[limit:] = -np.inf
        flat_choice = racing_sample(weights.ravel(), rng)
        interval, run = divmod(flat_choice, m)
        run += 1
        indices[j - run : j] = interval
        j -= run
        upper = interval
        first_step = False
    return IntervalSequence(indices)


def joint_exp(dataset, spec, params, rng):
    """Releases m quantile estimates with a single eps-DP mechanism draw.

    Runs the forward pass, samples an interval sequence backward, then draws
    one uniform value inside each sampled interval and returns the draws in
    increasing order.
    """
    if spec.n != dataset.n:
        raise ValueError(
            f"spec expects n={spec.n} but dataset has n={dataset.n}"
        )
    table = forward_pass(dataset, spec, params)
    seq = backward_sample(table, dataset, spec, params, rng)
    padded = dataset.padded()
    left = padded[seq.indices]
    right = padded[seq.indices + 1]
    draws = left + rng.uniform(spec.m) * (right - left)
    return QuantileEstimates(np.sort(draws))
