"""Single-quantile baselines composed to answer m quantiles.

Three estimators:

* ``app_ind_exp``: m independent exponential-mechanism draws, with the
  per-call budget solved from the nonadaptive composition bound for
  exponential mechanisms so the overall guarantee is (eps_g, delta)-DP.
* ``csmooth``: true quantile plus Laplace log-normal noise scaled to the
  quantile's smooth sensitivity; per-call budget eps/sqrt(m) under
  concentrated-DP composition.
* ``agg_tree``: a noisy hierarchical histogram answering range counts,
  hence CDF and quantile queries, for a single eps.
"""

import functools
import math
from dataclasses import dataclass

import numpy as np

from .core import QuantileEstimates, RandomSource, prepare_dataset
from .metrics import true_quantiles
from .numerics import racing_sample

DEFAULT_DELTA = 1e-6


# ---------------------------------------------------------------------------
# Independent exponential mechanism with optimal nonadaptive composition.


def ind_exp(dataset, quantile, epsilon, rng):
    """One eps-DP quantile estimate via the exponential mechanism.

    The data is extended with the bounds {a, b}; interval j between adjacent
    extended points is selected with probability proportional to
    exp(-eps * |j - q*n| / 2) * width(j) (utility sensitivity 1 under swap),
    then the estimate is drawn uniformly inside the selected interval.

    Consumes n+2 uniforms: n+1 for the race and one for the interval draw.
    """
    if not 0.0 < quantile < 1.0:
        raise ValueError("quantile must lie strictly inside (0, 1)")
    extended = dataset.padded()
    widths = np.diff(extended)
    with np.errstate(divide="ignore"):
        log_widths = np.log(widths)
    ranks = np.arange(dataset.n + 1) - quantile * dataset.n
    idx = racing_sample(log_widths - 0.5 * epsilon * np.abs(ranks), rng)
    return float(extended[idx] + rng.uniform() * widths[idx])


def ddr_delta(eps, m, eps_g):
    """The delta for which m nonadaptive eps-DP exponential-mechanism calls
    are (eps_g, delta)-DP.

    Evaluates, maximized over the cutoff index 0 <= l <= m,

        sum_i C(m, i) p^(m-i) (1-p)^i max(e^(m*t - i*eps) - e^(eps_g), 0)

    with t = (eps_g + (l+1) eps)/(m+1) clipped to [0, eps] and
    p = (e^-t - e^-eps) / (1 - e^-eps). Binomial terms are assembled in
    log space so the result stays finite for m up to 64.
    """
    if eps <= 0 or eps_g <= 0:
        raise ValueError("eps and eps_g must be positive")
    if m < 1:
        raise ValueError("m must be at least 1")
    log_binom = np.array(
        [
            math.lgamma(m + 1) - math.lgamma(i + 1) - math.lgamma(m - i + 1)
            for i in range(m + 1)
        ]
    )
    i_range = np.arange(m + 1)
    best = 0.0
    for ell in range(m + 1):
        t_star = min(max((eps_g + (ell + 1) * eps) / (m + 1), 0.0), eps)
        p = (math.exp(-t_star) - math.exp(-eps)) / -math.expm1(-eps)
        exponents = m * t_star - i_range * eps
        log_terms = log_binom + exponents
        with np.errstate(divide="ignore", invalid="ignore"):
            log_terms = log_terms + np.where(m - i_range > 0, (m - i_range) * np.log(p), 0.0)
            log_terms = log_terms + np.where(i_range > 0, i_range * np.log1p(-p), 0.0)
            # max(e^x - e^eps_g, 0) in log space: x + log(1 - e^(eps_g - x)).
            positive = exponents > eps_g
            log_terms = np.where(
                positive, log_terms + np.log1p(-np.exp(eps_g - exponents)), -np.inf
            )
        best = max(best, float(np.sum(np.exp(log_terms))))
    return best


@functools.lru_cache(maxsize=None)
def solve_per_call_epsilon(m, eps_g, delta_cap=DEFAULT_DELTA):
    """Largest per-call eps, at granularity 0.01, meeting the delta cap.

    Never returns less than eps_g / m (basic composition gives delta = 0
    there). ddr_delta is nondecreasing in eps, so the scan stops at the
    first grid point over the cap.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    best = eps_g / m
    for k in range(1, int(math.floor(eps_g / 0.01 + 1e-9)) + 1):
        eps = k / 100.0
        if ddr_delta(eps, m, eps_g) <= delta_cap:
            best = max(best, eps)
        else:
            break
    return best


@dataclass(frozen=True)
class CompositionBudget:
    """Overall budget plus the solved per-call epsilon that fits under it."""

    epsilon_g: float
    delta: float
    per_call_epsilon: float

    @classmethod
    def solve(cls, m, eps_g, delta=DEFAULT_DELTA):
        return cls(eps_g, delta, solve_per_call_epsilon(m, eps_g, delta))


def app_ind_exp(dataset, spec, eps_g, rng):
    """m independent quantile estimates under an overall (eps_g, 1e-6)-DP
    guarantee, sorted nondecreasing."""
    budget = CompositionBudget.solve(spec.m, eps_g)
    outputs = [
        ind_exp(dataset, q, budget.per_call_epsilon, rng) for q in spec.quantiles
    ]
    return QuantileEstimates(np.sort(outputs))


# ---------------------------------------------------------------------------
# Smooth sensitivity with Laplace log-normal noise under concentrated DP.


def smooth_sensitivity(dataset, quantile, t):
    """t-smooth sensitivity of the nearest-rank quantile on this dataset.

    Evaluates max over the number of changed points m' of
    e^(-t m') * max_k (x[j*+k] - x[j*+k-m'-1]) for k = 0..m'+1, with the
    sorted data extended by a below index 1 and b above index n. The double
    maximum is the direct O(n^2) evaluation, vectorized over k.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    n = dataset.n
    if n < 1:
        raise ValueError("dataset must contain at least one value")
    j_star = int(np.clip(math.ceil(quantile * n), 1, n))
    # Extended values for indices j*-n-1 .. j*+n+1, sentinel-padded.
    idx = np.arange(j_star - n - 1, j_star + n + 2)
    ext = np.where(
        idx < 1,
        dataset.lower_bound,
        np.where(idx > n, dataset.upper_bound, dataset.values[np.clip(idx, 1, n) - 1]),
    )
    center = n + 1  # position of j* within ext
    best = 0.0
    for changed in range(n + 1):
        upper = ext[center : center + changed + 2]
        lower = ext[center - changed - 1 : center + 1]
        local = float(np.max(upper - lower))
        best = max(best, math.exp(-t * changed) * local)
    return best


def lln_sample(sigma, rng):
    """One draw of Laplace(1) * exp(sigma * Normal(0, 1)).

    Consumes three uniforms in fixed order: one for the Laplace inverse CDF,
    two for the Box-Muller normal.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    lap = rng.laplace()
    return float(lap * math.exp(sigma * rng.normal()))


@dataclass(frozen=True)
class SmoothSensParams:
    """Noise-shape triple (t, s, sigma) for one smooth-sensitivity release.

    Releasing f(X) + S_f^t(X) * Z / s with Z Laplace log-normal of shape
    sigma is (eps^2/2)-concentrated-DP for eps = t/sigma + e^(1.5 sigma^2) s;
    that eps is recoverable via :meth:`epsilon`.
    """

    t: float
    s: float
    sigma: float

    def __post_init__(self):
        if self.t <= 0 or self.s <= 0 or self.sigma <= 0:
            raise ValueError("t, s and sigma must all be positive")

    def epsilon(self):
        return self.t / self.sigma + math.exp(1.5 * self.sigma**2) * self.s


def _solve_sigma(eps, t):
    """Positive root of (5 eps / t) sigma^3 - 5 sigma^2 - 1 = 0 by bisection.

    The cubic is -1 at sigma = 0 and eventually positive, with a single sign
    change on (0, inf), so doubling the upper end always brackets the root.
    """

    def poly(sigma):
        return (5.0 * eps / t) * sigma**3 - 5.0 * sigma**2 - 1.0

    hi = max(1.0, t / eps)
    while poly(hi) <= 0.0:
        hi *= 2.0
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if poly(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def default_t_grid():
    """50 logarithmically spaced candidate t values between 0.01 and 1."""
    return np.logspace(math.log10(0.01), 0.0, 50)


_CALIBRATION_SEED = 1729


@functools.lru_cache(maxsize=1)
def calibration_dataset():
    """Fixed standard-normal calibration data used for offline noise tuning.

    1000 points from N(0, 1) on the loose range [-100, 100]; the draw is
    seeded so tuning is reproducible and never touches user data.
    """
    rng = RandomSource(_CALIBRATION_SEED)
    return prepare_dataset(rng.normal(1000), -100.0, 100.0)


def tune_csmooth(eps_per_call, t_grid=None, quantile=0.5, calibration=None):
    """Selects the (t, s, sigma) triple minimizing release variance.

    For each candidate t, sigma solves the cubic above and
    s = e^(-1.5 sigma^2) (eps - t/sigma), which makes the concentrated-DP
    identity hold by construction; candidates with eps - t/sigma <= 0 cannot
    fund any noise scale and are skipped. The winner minimizes
    2 S^2 / (e^(-5 sigma^2) (eps - t/sigma)^2) with S the smooth sensitivity
    on the calibration dataset. This is a one-time offline step.
    """
    if t_grid is None:
        t_grid = default_t_grid()
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or np.any(t_grid <= 0):
        raise ValueError("t_grid must be nonempty with positive entries")
    if calibration is None:
        calibration = calibration_dataset()
    best = None
    best_variance = np.inf
    for t in t_grid:
        sigma = _solve_sigma(eps_per_call, t)
        margin = float(eps_per_call - t / sigma)
        denominator = math.exp(-5.0 * sigma**2) * margin**2
        if margin <= 0.0 or denominator == 0.0:
            continue
        s = math.exp(-1.5 * sigma**2) * margin
        sens = smooth_sensitivity(calibration, quantile, t)
        variance = 2.0 * sens**2 / denominator
        if variance < best_variance:
            best_variance = variance
            best = SmoothSensParams(float(t), s, sigma)
    if best is None:
        raise ValueError(
            f"no t in the grid leaves a positive budget margin at eps={eps_per_call}"
        )
    return best


_tuning_memo = {}


def _params_for(eps_per_call, quantile, table, m, index):
    if table is not None:
        entry = table.get((m, index))
        if entry is not None and abs(entry.epsilon() - eps_per_call) <= 1e-9:
            return entry
    key = (round(eps_per_call, 12), round(quantile, 12))
    if key not in _tuning_memo:
        _tuning_memo[key] = tune_csmooth(eps_per_call, quantile=quantile)
    return _tuning_memo[key]


def csmooth(dataset, spec, eps_total, rng, calibration_table=None):
    """Smooth-sensitivity quantile estimates under (eps^2/2)-concentrated DP.

    Each of the m quantiles is released as its true value plus
    S * Z / s noise at per-call budget eps_total / sqrt(m) (concentrated-DP
    composition adds the m budgets of (eps'^2)/2 each). Tuned parameters
    come from ``calibration_table`` (keyed by (m, quantile index)) when the
    entry matches the per-call budget, else from a memoized offline tuning
    run. Outputs are clamped to the data range and sorted.

    Consumes 3m uniforms, three per quantile in index order.
    """
    if calibration_table is None:
        calibration_table = load_default_calibration()
    eps_call = eps_total / math.sqrt(spec.m)
    truth = true_quantiles(dataset, spec).outputs
    outputs = np.empty(spec.m)
    for j, q in enumerate(spec.quantiles, start=1):
        params = _params_for(eps_call, float(q), calibration_table, spec.m, j)
        sens = smooth_sensitivity(dataset, q, params.t)
        z = lln_sample(params.sigma, rng)
        outputs[j - 1] = truth[j - 1] + sens * z / params.s
    outputs = np.clip(outputs, dataset.lower_bound, dataset.upper_bound)
    return QuantileEstimates(np.sort(outputs))


def save_calibration(table, path):
    """Writes (m, quantile index, t, s, sigma) rows, whitespace-separated."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# m quantile_index t s sigma\n")
        for (m, index) in sorted(table):
            p = table[(m, index)]
            fh.write(
                f"{m} {index} {float(p.t)!r} {float(p.s)!r} {float(p.sigma)!r}\n"
            )


def load_calibration(path):
    table = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            m, index, t, s, sigma = line.split()
            table[(int(m), int(index))] = SmoothSensParams(
                float(t), float(s), float(sigma)
            )
    return table


@functools.lru_cache(maxsize=1)
def load_default_calibration():
    """Table shipped with the package, tuned at eps_total = 1 for m <= 29."""
    from importlib import resources

    ref = resources.files("dpq").joinpath("data/csmooth_calibration.txt")
    if not ref.is_file():
        return {}
    table = {}
    for line in ref.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        m, index, t, s, sigma = line.split()
        table[(int(m), int(index))] = SmoothSensParams(float(t), float(s), float(sigma))
    return table


def generate_calibration_table(max_m=29, eps_total=1.0):
    """Tunes every (m, quantile index) pair for evenly spaced quantiles."""
    table = {}
    for m in range(1, max_m + 1):
        eps_call = eps_total / math.sqrt(m)
        for j in range(1, m + 1):
            q = j / (m + 1)
            table[(m, j)] = tune_csmooth(eps_call, quantile=q)
    return table


# ---------------------------------------------------------------------------
# Noisy hierarchical histogram ("aggregated tree") CDF estimation.

# Tuned (height, branching) per quantile count, misclassified-points metric.
_AGGTREE_TUNED = {
    1: (4, 4), 2: (3, 6), 3: (3, 6), 4: (3, 9), 5: (2, 14), 6: (3, 10),
    7: (3, 7), 8: (3, 7), 9: (3, 10), 10: (3, 10), 11: (3, 8), 12: (3, 7),
    13: (3, 7), 14: (3, 12), 15: (3, 10), 16: (3, 10), 17: (3, 10),
    18: (3, 10), 19: (3, 7), 20: (3, 10), 21: (3, 10), 22: (3, 7),
    23: (3, 10), 24: (3, 12), 25: (3, 12), 26: (3, 12), 27: (3, 10),
    28: (3, 10), 29: (3, 12),
}
_MAX_LEAVES = 10**7


@dataclass(frozen=True)
class AggTreeConfig:
    """Complete b-ary tree of the given height over equal-width buckets."""

    branching: int
    height: int
    epsilon: float  # math.inf disables noise

    def __post_init__(self):
        if self.branching < 2:
            raise ValueError("branching factor must be at least 2")
        if self.height < 1:
            raise ValueError("height must be at least 1")
        if self.branching**self.height > _MAX_LEAVES:
            raise ValueError(f"refusing to build more than {_MAX_LEAVES} leaf buckets")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    @classmethod
    def tuned(cls, m, epsilon):
        height, branching = _AGGTREE_TUNED.get(m, (3, 10))
        return cls(branching, height, epsilon)


@dataclass(frozen=True)
class NoisyTree:
    config: AggTreeConfig
    lower_bound: float
    upper_bound: float
    n: int
    levels: tuple  # level l holds branching**l noisy counts, root first


def agg_tree_build(dataset, config, rng):
    """Counts points per node of the bucket tree and adds Lap(h/eps) noise.

    Noise is drawn root first, then level by level left to right, one
    uniform per node, so stream usage is fixed by (branching, height).
    """
    b, h = config.branching, config.height
    edges = np.linspace(dataset.lower_bound, dataset.upper_bound, b**h + 1)
    counts = np.histogram(dataset.values, bins=edges)[0].astype(float)
    exact = [counts]
    while exact[0].size > 1:
        exact.insert(0, exact[0].reshape(-1, b).sum(axis=1))
    scale = 0.0 if math.isinf(config.epsilon) else h / config.epsilon
    levels = []
    for level_counts in exact:
        noise = rng.laplace(level_counts.size) * scale
        levels.append(level_counts + noise)
    return NoisyTree(config, dataset.lower_bound, dataset.upper_bound,
                     dataset.n, tuple(levels))


def _aggregate(tree):
    """Inverse-variance blend of each node's count with its children's sum.

    One upward pass: a node's own count has the per-node noise variance,
    while the sum of its c children's aggregated estimates carries c times
    their (equal) variance, so the children's sum gets 1/c of the weight at
    the first level up, and so on recursively. Noise-free trees are already
    consistent and pass through unchanged.
    """
    b, h = tree.config.branching, tree.config.height
    if math.isinf(tree.config.epsilon):
        return list(tree.levels)
    own_var = 2.0 * (h / tree.config.epsilon) ** 2
    agg = [None] * (h + 1)
    agg[h] = tree.levels[h]
    child_var = own_var
    for level in range(h - 1, -1, -1):
        child_sum = agg[level + 1].reshape(-1, b).sum(axis=1)
        w_own = 1.0 / own_var
        w_children = 1.0 / (b * child_var)
        agg[level] = (w_own * tree.levels[level] + w_children * child_sum) / (
            w_own + w_children
        )
        child_var = 1.0 / (w_own + w_children)
    return agg


def agg_tree_quantiles(tree, spec):
    """Answers the requested quantiles from the noisy tree.

    Builds the estimated CDF at every bucket boundary by decomposing each
    prefix range into maximal aligned subtrees (the canonical left
    decomposition) and forcing monotonicity with a running maximum, clamped
    to [0, n]. Quantile q is answered at bucket granularity: the left edge
    of the first bucket whose cumulative estimate reaches q * n. Answers
    are therefore exact only up to one bucket width even without noise.
    """
    b, h = tree.config.branching, tree.config.height
    agg = _aggregate(tree)
    leaves = b**h
    boundaries = np.arange(leaves + 1)
    prefix = np.zeros(leaves + 1)
    for level in range(h + 1):
        cums = np.concatenate(([0.0], np.cumsum(agg[level])))
        node = boundaries // b ** (h - level)
        parent_start = (boundaries // b ** (h - level + 1)) * b
        prefix += cums[node] - cums[parent_start]
    prefix = np.maximum.accumulate(prefix)
    prefix = np.clip(prefix, 0.0, tree.n)

    width = (tree.upper_bound - tree.lower_bound) / leaves
    targets = spec.quantiles * tree.n
    outputs = np.empty(spec.m)
    for j, target in enumerate(targets):
        k = int(np.searchsorted(prefix[1:], target, side="left"))
        outputs[j] = tree.lower_bound + min(k, leaves - 1) * width
    return QuantileEstimates(outputs)


def agg_tree(dataset, spec, epsilon, rng, config=None):
    """Builds a tuned tree for spec.m and answers the quantiles from it."""
    if config is None:
        config = AggTreeConfig.tuned(spec.m, epsilon)
    return agg_tree_quantiles(agg_tree_build(dataset, config, rng), spec)
