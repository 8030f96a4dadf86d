"""Epsilon-cell grid index over the leading indexed dimensions.

Points are binned into cells of width epsilon using floor division
(toward -inf, so negative coordinates need no translation).  Only the
first k_idx dimensions are indexed; in high dimensions that keeps the
neighbor enumeration bounded at 3^k_idx cells while the candidate sets
stay supersets of the true neighbors, since unindexed dimensions are
simply unconstrained.  Every query point in a cell shares that cell's
candidate set, which is what lets the join feed eight same-cell queries
to one tile.  A built index is immutable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

DEFAULT_K_IDX_CAP = 6  # bounds neighbor enumeration at 3^6 = 729 cells

CellCoord = tuple


def default_k_idx(d: int) -> int:
    return min(d, DEFAULT_K_IDX_CAP)


@dataclass(frozen=True)
class GridIndex:
    """Sparse map from occupied cell coordinates to member point ids.

    cells: CellCoord -> int64 ids, ascending.  ordered_cells lists the
    occupied cells lexicographically, and point_order is the permutation
    that groups point ids cell by cell in that order.
    """

    epsilon: float
    k_idx: int
    cells: dict
    ordered_cells: list
    point_order: np.ndarray

    @property
    def n_cells(self) -> int:
        return len(self.ordered_cells)


def _logical(dataset) -> np.ndarray:
    if hasattr(dataset, "logical"):
        return np.asarray(dataset.logical)
    arr = np.asarray(dataset, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"expected an (n, d) point array, got ndim={arr.ndim}")
    return arr


def cell_of(point, epsilon: float, k_idx: int) -> CellCoord:
    """Cell coordinate of one point: floor(p_j / epsilon) over the first k_idx dims."""
    p = np.asarray(point, dtype=np.float64).reshape(-1)
    return tuple(int(v) for v in np.floor(p[:k_idx] / epsilon).astype(np.int64))


def build_index(dataset, epsilon: float, k_idx: int | None = None) -> GridIndex:
    """Assign every point to its epsilon-cell and group the ids.

    k_idx defaults to min(d, 6).  Cell member lists are ascending and
    point_order concatenates them in lexicographic cell order, so two
    builds over the same data are identical.
    """
    x = _logical(dataset)
    n, d = x.shape
    if not np.isfinite(epsilon) or epsilon <= 0:
        raise ValidationError(f"epsilon must be positive and finite, got {epsilon}")
    if k_idx is None:
        k_idx = default_k_idx(d)
    if not 1 <= k_idx <= d:
        raise ValidationError(f"k_idx must be in [1, {d}], got {k_idx}")
    coords = np.floor(x[:, :k_idx] / epsilon).astype(np.int64)
    # lexsort is stable: primary key first dimension, ids ascending within a cell
    order = np.lexsort(tuple(coords[:, j] for j in range(k_idx - 1, -1, -1)))
    sorted_coords = coords[order]
    boundaries = np.nonzero((sorted_coords[1:] != sorted_coords[:-1]).any(axis=1))[0] + 1
    starts = np.concatenate([[0], boundaries, [n]])
    cells = {}
    ordered_cells = []
    for s, e in zip(starts[:-1], starts[1:]):
        coord = tuple(int(v) for v in sorted_coords[s])
        ids = np.sort(order[s:e]).astype(np.int64)
        cells[coord] = ids
        ordered_cells.append(coord)
    point_order = np.concatenate([cells[c] for c in ordered_cells])
    return GridIndex(
        epsilon=float(epsilon),
        k_idx=int(k_idx),
        cells=cells,
        ordered_cells=ordered_cells,
        point_order=point_order,
    )


def neighbor_cells(index: GridIndex, cell) -> list:
    """Occupied cells within Chebyshev distance 1 of ``cell``, lexicographic.

    Includes ``cell`` itself when occupied.
    """
    cell = tuple(cell)
    if len(cell) != index.k_idx:
        raise ValidationError(f"cell has {len(cell)} coordinates, index has k_idx={index.k_idx}")
    cells = index.cells
    out = []
    for offsets in itertools.product((-1, 0, 1), repeat=index.k_idx):
        nb = tuple(c + o for c, o in zip(cell, offsets))
        if nb in cells:
            out.append(nb)
    return out


def candidates_for_cell(index: GridIndex, cell) -> np.ndarray:
    """Point ids a query in ``cell`` must be refined against.

    Concatenates the member lists of the neighboring cells in cell order
    (ids ascending within each); cells are disjoint so duplicates cannot
    occur.  The result is a superset of every member's true epsilon
    neighborhood.
    """
    cell = tuple(cell)
    if cell not in index.cells:
        raise ValidationError(f"cell {cell} is empty")
    members = [index.cells[nb] for nb in neighbor_cells(index, cell)]
    return np.concatenate(members)
