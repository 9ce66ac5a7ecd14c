"""Numerically stable primitives used by the samplers.

All probability-like quantities in this package live in the log domain;
weight zero is encoded as -inf. The helpers here are the only places where
values cross between log and linear space.
"""

from dataclasses import dataclass

import numpy as np

# Log-weight vectors are plain float arrays whose entries are ln(weight),
# with -inf encoding weight zero.
LogWeights = np.ndarray

_U_EPS = 2.0**-53


def log_sum_exp(log_weights):
    """Returns ln(sum_i exp(log_weights_i)) without underflow.

    Max-subtraction scheme: shift by the max, exponentiate, sum, re-log and
    shift back. All-(-inf) input returns -inf.
    """
    lw = np.asarray(log_weights, dtype=float)
    if lw.size == 0 or np.max(lw) == -np.inf:
        return -np.inf
    m = np.max(lw)
    return m + np.log(np.sum(np.exp(lw - m)))


def log_sum_exp_rows(log_matrix):
    """Row-wise log-sum-exp of a 2-d array; rows of -inf map to -inf."""
    lm = np.asarray(log_matrix, dtype=float)
    row_max = np.max(lm, axis=1)
    finite = row_max > -np.inf
    # Shift rows by their max (0 for empty rows, avoiding inf - inf), then
    # exponentiate and reduce in place to keep memory traffic low.
    shifted = lm - np.where(finite, row_max, 0.0)[:, None]
    np.exp(shifted, out=shifted)
    sums = np.sum(shifted, axis=1)
    with np.errstate(divide="ignore"):
        np.log(sums, out=sums)
    return np.where(finite, row_max + sums, -np.inf)


@dataclass(frozen=True)
class ToeplitzOperator:
    """An r x c constant-diagonal matrix stored by first column and first row.

    T[i][j] = first_column[i - j] for i >= j, else first_row[j - i].
    """

    first_column: np.ndarray
    first_row: np.ndarray

    def __post_init__(self):
        col = np.asarray(self.first_column, dtype=float)
        row = np.asarray(self.first_row, dtype=float)
        object.__setattr__(self, "first_column", col)
        object.__setattr__(self, "first_row", row)
        if col.ndim != 1 or row.ndim != 1 or col.size == 0 or row.size == 0:
            raise ValueError("first_column and first_row must be nonempty vectors")
        c0, r0 = col[0], row[0]
        if c0 != r0 and not (np.isnan(c0) and np.isnan(r0)):
            raise ValueError("first_column[0] must equal first_row[0]")

    @property
    def shape(self):
        return (self.first_column.size, self.first_row.size)

    def dense(self):
        """Materializes the full matrix; intended for small instances."""
        r, c = self.shape
        idx = np.arange(r)[:, None] - np.arange(c)[None, :]
        out = np.empty((r, c))
        lower = idx >= 0
        out[lower] = self.first_column[idx[lower]]
        out[~lower] = self.first_row[-idx[~lower]]
        return out


def _next_pow_two(n):
    return 1 << (int(n) - 1).bit_length()


def toeplitz_matvec(op, vec):
    """Computes T @ vec by circulant embedding and one FFT round trip.

    The generator [col, 0-pad, reversed row tail] of length 2^k >= r + c - 1
    defines a circulant whose action on the zero-padded vector reproduces the
    Toeplitz product in its first r coordinates.
    """
    vec = np.asarray(vec, dtype=float)
    r, c = op.shape
    if vec.shape != (c,):
        raise ValueError(f"vector of length {vec.size} incompatible with {r}x{c} operator")
    size = _next_pow_two(r + c - 1)
    gen = np.zeros(size)
    gen[:r] = op.first_column
    if c > 1:
        gen[-(c - 1):] = op.first_row[1:][::-1]
    padded = np.zeros(size)
    padded[:c] = vec
    prod = np.fft.irfft(np.fft.rfft(gen) * np.fft.rfft(padded), size)
    return prod[:r]


def log_toeplitz_matvec(log_op, log_vec):
    """Entrywise ln of (exp(log_op) @ exp(log_vec)), computed via one FFT.

    Shifts the operator by its joint column/row max and the vector by its
    max, multiplies outside of log space, then re-logs and adds the maxima
    back. A single global matrix max is used (not a per-row max), so
    accuracy is best when entries within one operand span a moderate range;
    absolute levels can be arbitrarily far below the underflow threshold.
    Inverse-FFT roundoff can produce tiny negative products; those are
    clamped to zero (true products are nonnegative) before re-logging.
    """
    log_vec = np.asarray(log_vec, dtype=float)
    r, c = log_op.shape
    if log_vec.shape != (c,):
        raise ValueError(f"vector of length {log_vec.size} incompatible with {r}x{c} operator")
    col_finite = np.isfinite(log_op.first_column)
    row_finite = np.isfinite(log_op.first_row)
    vec_finite = np.isfinite(log_vec)
    if not (col_finite.any() or row_finite.any()) or not vec_finite.any():
        return np.full(r, -np.inf)
    max_op = max(np.max(log_op.first_column), np.max(log_op.first_row))
    max_vec = np.max(log_vec)
    shifted_op = ToeplitzOperator(
        np.exp(log_op.first_column - max_op),
        np.exp(log_op.first_row - max_op),
    )
    prod = toeplitz_matvec(shifted_op, np.exp(log_vec - max_vec))
    np.clip(prod, 0.0, None, out=prod)
    if not (col_finite.all() and row_finite.all() and vec_finite.all()):
        # FFT roundoff can turn a structurally zero row (no finite term at
        # all) into a tiny positive value; an indicator convolution counts
        # the finite contributions per row exactly, so zero rows stay zero.
        counts = toeplitz_matvec(
            ToeplitzOperator(col_finite.astype(float), row_finite.astype(float)),
            vec_finite.astype(float),
        )
        prod[counts < 0.5] = 0.0
    with np.errstate(divide="ignore"):
        return np.log(prod) + (max_op + max_vec)


def racing_sample(log_weights, rng):
    """Draws an index with probability proportional to exp(log_weights).

    Racing method: with U_k uniform, the argmin over k of
    ln(ln(1/U_k)) - log_weights[k] is distributed proportionally to the
    weights. Entries of -inf get probability zero. Consumes exactly
    len(log_weights) uniforms per call; uniforms are clipped away from
    {0, 1} so the race keys stay finite.
    """
    lw = np.asarray(log_weights, dtype=float)
    if lw.size == 0 or not np.any(lw > -np.inf):
        raise ValueError("racing_sample needs at least one finite log weight")
    keys = rng.uniform(lw.size)
    np.clip(keys, _U_EPS, 1.0 - _U_EPS, out=keys)
    # ln(ln(1/u)) = ln(-ln(u)), built in place to avoid temporaries.
    np.log(keys, out=keys)
    np.negative(keys, out=keys)
    np.log(keys, out=keys)
    keys -= lw
    return int(np.argmin(keys))
