"""Independent brute-force references.

Everything here is deliberately naive: the O(n^2) join evaluates the
textbook squared-distance sum pair by pair with no index, no tiles, and
no short-circuiting, and the reference multiply-accumulate is a scalar
triple loop.  These functions validate the rest of the package and must
never import the tile engine, the distance kernels, or the grid index.

Reference rounding is pinned: squared distances sum the dimensions in
ascending order, and the triple loop sums its inner dimension in
ascending order with the accumulator term added last.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ResourceError, ValidationError

BRUTE_FORCE_GUARD = 50_000  # max n without force=True

_BLOCK_ROWS = 256


@dataclass(frozen=True)
class OraclePairSet:
    """All ordered pairs (i, j) with squared distance <= epsilon^2.

    ``pairs`` is an (m, 2) int64 array sorted ascending by (i, j) and
    contains (i, i) for every point.
    """

    pairs: np.ndarray
    epsilon: float

    @property
    def total_pairs(self) -> int:
        return len(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


def _logical_coords(dataset) -> np.ndarray:
    if hasattr(dataset, "logical"):
        return np.asarray(dataset.logical, dtype=np.float64)
    arr = np.asarray(dataset, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"expected an (n, d) point array, got ndim={arr.ndim}")
    return arr


def brute_force_join(dataset, epsilon: float, force: bool = False) -> OraclePairSet:
    """All-pairs epsilon self-join by direct evaluation.

    Every ordered pair is tested with the plain sum of squared coordinate
    differences, dimensions ascending, against epsilon^2.  Self-pairs are
    included.  Refuses n > BRUTE_FORCE_GUARD unless ``force`` is set.
    """
    x = _logical_coords(dataset)
    n = x.shape[0]
    if n > BRUTE_FORCE_GUARD and not force:
        raise ResourceError(
            f"brute-force join over n={n} exceeds the guard of {BRUTE_FORCE_GUARD}; "
            "pass force=True to run it anyway"
        )
    if not np.isfinite(epsilon) or epsilon <= 0:
        raise ValidationError(f"epsilon must be positive and finite, got {epsilon}")
    eps_sq = epsilon * epsilon
    d = x.shape[1]
    chunks_i = []
    chunks_j = []
    for start in range(0, n, _BLOCK_ROWS):
        q = x[start : start + _BLOCK_ROWS]
        acc = np.zeros((q.shape[0], n))
        for dim in range(d):  # ascending-dimension summation is the reference order
            diff = q[:, dim, None] - x[None, :, dim]
            acc += diff * diff
        ii, jj = np.nonzero(acc <= eps_sq)
        chunks_i.append(ii + start)
        chunks_j.append(jj)
    pairs = np.column_stack([np.concatenate(chunks_i), np.concatenate(chunks_j)])
    # block enumeration already yields ascending (i, j)
    return OraclePairSet(pairs=pairs.astype(np.int64), epsilon=float(epsilon))


def naive_mma(a, b, c) -> np.ndarray:
    """Textbook 8x8 = 8x4 @ 4x8 + 8x8 multiply-accumulate, scalar triple loop."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if a.shape != (8, 4) or b.shape != (4, 8) or c.shape != (8, 8):
        raise ValidationError(
            f"naive_mma expects shapes (8,4), (4,8), (8,8); got {a.shape}, {b.shape}, {c.shape}"
        )
    out = np.empty((8, 8))
    for r in range(8):
        for col in range(8):
            acc = 0.0
            for k in range(4):
                acc += a[r, k] * b[k, col]
            acc += c[r, col]
            out[r, col] = acc
    return out
