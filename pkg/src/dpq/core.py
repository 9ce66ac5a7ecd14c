"""Shared domain types: bounded sorted data, quantile targets, and seeded randomness."""

from dataclasses import dataclass, field

import numpy as np

_TWO64 = 2**64


class RandomSource:
    """Deterministic stream of uniform draws in [0, 1).

    Identical seeds produce identical streams, which is the reproducibility
    contract every estimator and the benchmark harness rely on. All other
    distributions (normal, Laplace, Laplace log-normal) are derived from this
    uniform stream in a fixed draw order, so a run is fully determined by its
    seed. Instances are not thread-safe; parallel work should derive one
    source per worker (seed = master seed + worker index).
    """

    def __init__(self, seed):
        self.seed = int(seed)
        self._gen = np.random.default_rng(self.seed % _TWO64)

    def uniform(self, size=None):
        """Returns uniform draws in [0, 1); a scalar when size is None."""
        return self._gen.random(size)

    def normal(self, size=None):
        """Standard normal draws via the Box-Muller transform of uniforms.

        Each draw consumes exactly two uniforms (the sine partner is
        discarded) so stream usage stays easy to reason about.
        """
        n = 1 if size is None else int(size)
        u1 = 1.0 - self.uniform(n)  # (0, 1]: keeps log finite
        u2 = self.uniform(n)
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return z[0] if size is None else z

    def laplace(self, size=None):
        """Standard Laplace draws via inverse CDF of one uniform each."""
        n = 1 if size is None else int(size)
        u = np.clip(self.uniform(n), 2.0**-53, 1.0 - 2.0**-53)
        z = np.where(u < 0.5, np.log(2.0 * u), -np.log(2.0 * (1.0 - u)))
        return z[0] if size is None else z


@dataclass(frozen=True)
class SortedDataset:
    """Nondecreasing scalar data clamped to a declared range [a, b].

    ``values`` holds x_1 <= ... <= x_n; the sentinels x_0 = a and
    x_{n+1} = b used by the interval mechanics live in :meth:`padded`.
    """

    values: np.ndarray
    lower_bound: float
    upper_bound: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if not self.lower_bound < self.upper_bound:
            raise ValueError(
                f"lower bound {self.lower_bound} must be < upper bound {self.upper_bound}"
            )
        if vals.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if vals.size and (vals[0] < self.lower_bound or vals[-1] > self.upper_bound):
            raise ValueError("values must lie within [lower_bound, upper_bound]")
        if np.any(np.diff(vals) < 0):
            raise ValueError("values must be nondecreasing")

    @property
    def n(self):
        return int(self.values.size)

    def padded(self):
        """Values with the sentinels a and b attached: [a, x_1, ..., x_n, b]."""
        return np.concatenate(
            ([self.lower_bound], self.values, [self.upper_bound])
        )

    def gap_widths(self):
        """Widths tau(i) = x_{i+1} - x_i of the n+1 inter-point intervals."""
        return np.diff(self.padded())


@dataclass(frozen=True)
class QuantileSpec:
    """Strictly increasing target quantiles plus the gap counts they induce.

    For data size n, the expected number of points between adjacent targets is
    n_j = (q_j - q_{j-1}) * n with q_0 = 0 and q_{m+1} = 1. The n_j are kept
    as reals (never rounded) because the utility compares |count - n_j|
    against generally non-integer n_j.
    """

    quantiles: np.ndarray
    n: int

    def __post_init__(self):
        qs = np.asarray(self.quantiles, dtype=float)
        object.__setattr__(self, "quantiles", qs)
        object.__setattr__(self, "n", int(self.n))
        if qs.ndim != 1 or qs.size == 0:
            raise ValueError("quantiles must be a nonempty 1-d sequence")
        if qs[0] <= 0.0 or qs[-1] >= 1.0:
            raise ValueError("quantiles must lie strictly inside (0, 1)")
        if np.any(np.diff(qs) <= 0):
            raise ValueError("quantiles must be strictly increasing")
        if self.n < 0:
            raise ValueError("n must be nonnegative")

    @property
    def m(self):
        return int(self.quantiles.size)

    def gap_counts(self):
        """n_j for j = 1..m+1, an array of length m+1 summing to n."""
        padded_q = np.concatenate(([0.0], self.quantiles, [1.0]))
        return np.diff(padded_q) * self.n


@dataclass(frozen=True)
class QuantileEstimates:
    """A nondecreasing vector of m estimated quantile values."""

    outputs: np.ndarray = field()

    def __post_init__(self):
        out = np.asarray(self.outputs, dtype=float)
        object.__setattr__(self, "outputs", out)
        if out.ndim != 1 or out.size == 0:
            raise ValueError("outputs must be a nonempty 1-d sequence")
        if np.any(np.diff(out) < 0):
            raise ValueError("outputs must be nondecreasing")

    @property
    def m(self):
        return int(self.outputs.size)


def prepare_dataset(raw, lower_bound, upper_bound):
    """Clamps raw values to [lower_bound, upper_bound] and sorts them.

    Multiplicity is preserved; duplicates are legal (they cost utility but
    not privacy). Idempotent: preparing an already-prepared dataset's values
    returns an equal dataset.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.size == 0:
        raise ValueError("cannot prepare an empty dataset")
    if not lower_bound < upper_bound:
        raise ValueError(
            f"lower bound {lower_bound} must be < upper bound {upper_bound}"
        )
    values = np.sort(np.clip(raw, lower_bound, upper_bound))
    return SortedDataset(values, float(lower_bound), float(upper_bound))


def jitter(dataset, scale, rng):
    """Perturbs each value by an independent uniform draw in [-scale, +scale].

    Data-independent noise used to break up duplicate values; the result is
    re-clamped and re-sorted. scale = 0 is the identity.
    """
    if scale < 0:
        raise ValueError("jitter scale must be nonnegative")
    if scale == 0 or dataset.n == 0:
        return dataset
    noise = (2.0 * rng.uniform(dataset.n) - 1.0) * scale
    return prepare_dataset(
        dataset.values + noise, dataset.lower_bound, dataset.upper_bound
    )
