"""Euclidean distance kernels expressed as tile multiply-accumulates.

Two formulations of the squared distance are built on the tile engine:

* ``distance_tile_v1`` computes differences first and squares them via a
  second multiply, which wastes the off-diagonal of the accumulator; only
  the diagonal holds real distances.  It is kept as a reference for the
  agreement tests and is not used by the join driver.
* ``distance_tile_v2`` uses the expansion ``sum a_i^2 - 2 a_i b_i + b_i^2``
  to fill the whole 8x8 accumulator with distances between eight query
  points and eight candidate points.  The ``-2ab + b^2`` part runs on the
  tile engine (the candidate norms ride in the accumulator operand); the
  ``a^2`` term is a plain per-row vector add on the scalar side.

Coordinates are consumed four dimensions per step ("chunk"), so a full
distance takes ceil(d/4) multiply-accumulates, and per-point partial
squared norms are precomputed once per chunk and reused by every tile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .tiles import (
    TILE_K,
    TILE_M,
    TILE_N,
    TileAcc,
    TileB,
    load_tile_col_major,
    load_tile_row_major,
    mma,
    scale_tile,
    store_tile,
)

#: Marker returned by scalar_distance_sq when short-circuiting abandons the sum.
PRUNED = object()


def cancellation_floor(query_sq_norm: float, candidate_sq_norm: float) -> float:
    """Tolerance absorbing FP cancellation of the expanded form near zero."""
    return 1e-9 * max(1.0, query_sq_norm + candidate_sq_norm)


@dataclass(frozen=True)
class ChunkNorms:
    """Per-point partial squared norms, one entry per 4-dimension chunk.

    Entry j of point p sums the squares of coordinates 4j..4j+3 (zero
    padding included, which contributes nothing).  values has shape
    (n, ceil(d/4)).
    """

    values: np.ndarray

    @property
    def n_chunks(self) -> int:
        return self.values.shape[1]

    @property
    def entry_count(self) -> int:
        return self.values.size


@dataclass
class DistanceTile:
    """8x8 block of squared distances; row = query slot, column = candidate slot.

    Only the leading valid_queries x valid_candidates rectangle is
    meaningful.  ``pruned`` marks a tile whose remaining chunks were
    skipped because every valid entry already exceeded epsilon^2; its
    entries are then partial sums, not distances.
    """

    sq_dists: np.ndarray
    valid_queries: int
    valid_candidates: int
    pruned: bool = False
    chunks_executed: int = 0

    @property
    def valid(self) -> np.ndarray:
        return self.sq_dists[: self.valid_queries, : self.valid_candidates]


@dataclass
class ChunkCursor:
    """Progress through the chunk loop: next chunk index plus the running tile."""

    chunk_index: int
    accumulated: np.ndarray


def _as_padded_block(points) -> np.ndarray:
    """Coerce a Dataset, an (m, d) array, or a single point to padded rows."""
    if hasattr(points, "coords"):
        return points.coords
    arr = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if arr.ndim != 2:
        raise ValidationError(f"expected points as an (m, d) array, got ndim={arr.ndim}")
    d = arr.shape[1]
    width = -(-d // 4) * 4
    if width == d and arr.flags.c_contiguous:
        return arr
    out = np.zeros((arr.shape[0], width))
    out[:, :d] = arr
    return out


def precompute_chunk_norms(dataset) -> ChunkNorms:
    """Sum squared coordinates per 4-dimension chunk, once per dataset.

    Accepts a Dataset or a raw (n, d) array.  The total entry count is
    exactly n * ceil(d/4).
    """
    x = _as_padded_block(dataset)
    if not np.isfinite(x).all():
        p, dim = np.argwhere(~np.isfinite(x))[0]
        raise ValidationError(f"non-finite coordinate at point {p}, dimension {dim}")
    n_chunks = x.shape[1] // TILE_K
    values = np.zeros((x.shape[0], n_chunks))
    for j in range(n_chunks):
        for i in range(TILE_K):  # ascending within the chunk
            col = x[:, TILE_K * j + i]
            values[:, j] += col * col
    return ChunkNorms(values)


def leading_identity() -> TileB:
    """4x8 operand whose leading 4x4 block is the identity, rest zeros."""
    data = np.zeros((TILE_K, TILE_N))
    data[:TILE_K, :TILE_K] = np.eye(TILE_K)
    return TileB(data)


def distance_tile_v1(query, candidates, identity: TileB) -> np.ndarray:
    """Difference-then-square distance tile; returns the diagonal.

    Per chunk, two multiply-accumulate passes: the first replicates the
    query row across the tile (a stride-0 load) and multiplies it by the
    identity while accumulating the negated candidate rows, leaving one
    difference vector per row; the second multiplies that block by its own
    column-major reload, accumulating squared distances.  Only the
    diagonal of the final accumulator is a real distance, so the result is
    the leading ``len(candidates)`` diagonal entries.
    """
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    cand = np.atleast_2d(np.asarray(candidates, dtype=np.float64))
    if cand.shape[1] != q.shape[0]:
        raise ValidationError(
            f"query has {q.shape[0]} dimensions but candidates have {cand.shape[1]}"
        )
    m = cand.shape[0]
    if m > TILE_M:
        raise ValidationError(f"at most {TILE_M} candidates per tile, got {m}")
    width = -(-q.shape[0] // TILE_K) * TILE_K
    qpad = np.zeros(width)
    qpad[: q.shape[0]] = q
    cpad = np.zeros((TILE_M, width))
    cpad[:m, : q.shape[0]] = cand  # unused rows and padding columns stay zero
    # the fragment negation of the candidate block is folded into staging,
    # because at these shapes the candidates sit in the accumulator slot
    cneg = -cpad
    cand_stage = np.zeros(TILE_M * TILE_N)
    tmp = np.empty(TILE_M * TILE_N)
    out = TileAcc()
    for j in range(width // TILE_K):
        a = load_tile_row_major(qpad, TILE_K * j, 0, TILE_M, TILE_K)
        cand_stage.reshape(TILE_M, TILE_N)[:, :TILE_K] = cneg[:, TILE_K * j : TILE_K * j + TILE_K]
        acc = load_tile_row_major(cand_stage, 0, TILE_N, TILE_M, TILE_N)
        diff = mma(a, identity, acc)
        store_tile(diff, tmp, 0, TILE_N)
        a2 = load_tile_row_major(tmp, 0, TILE_N, TILE_M, TILE_K)
        b2 = load_tile_col_major(tmp, 0, TILE_N, TILE_K, TILE_N)
        out = mma(a2, b2, out)
    return np.diagonal(out.data)[:m].copy()


def distance_tile_v2(
    queries,
    candidates,
    query_norms: np.ndarray,
    candidate_norms: np.ndarray,
    epsilon_sq: float = math.inf,
    short_circuit: bool = False,
) -> DistanceTile:
    """Expanded-form distance tile: up to 8 queries against up to 8 candidates.

    Per chunk j (ascending): one multiply-accumulate with A = -2 x query
    chunk rows, B = candidate chunk columns (column-major load), C = the
    candidate chunk norms replicated across rows; the query chunk norm is
    then added per row outside the tile engine.  After the last chunk each
    valid entry is the squared distance (clamped at zero against FP
    cancellation).

    With ``short_circuit`` set, the chunk loop stops early once every
    valid entry exceeds ``epsilon_sq``; the tile comes back flagged pruned
    with fewer chunks executed.  Queries are expected to share one index
    cell so they can share the candidate block; the kernel itself does not
    check that.
    """
    if not epsilon_sq >= 0:
        raise ValidationError(f"epsilon_sq must be >= 0, got {epsilon_sq}")
    qblock = _as_padded_block(queries)
    cblock = _as_padded_block(candidates)
    if qblock.shape[1] != cblock.shape[1]:
        raise ValidationError(
            f"queries have {qblock.shape[1]} padded dimensions, candidates {cblock.shape[1]}"
        )
    vq, vc = qblock.shape[0], cblock.shape[0]
    if vq > TILE_M or vc > TILE_N:
        raise ValidationError(f"tile holds at most 8x8 points, got {vq}x{vc}")
    width = qblock.shape[1]
    n_chunks = width // TILE_K
    qn = np.asarray(query_norms, dtype=np.float64)
    cn = np.asarray(candidate_norms, dtype=np.float64)
    if qn.shape != (vq, n_chunks) or cn.shape != (vc, n_chunks):
        raise ValidationError(
            f"norm slices must be ({vq}, {n_chunks}) and ({vc}, {n_chunks}), "
            f"got {qn.shape} and {cn.shape}"
        )

    qflat = _padded_flat(qblock, TILE_M)
    cflat = _padded_flat(cblock, TILE_N)
    # chunk-major staging so each chunk's 8 norms are contiguous for the
    # stride-0 replicating load
    cn_stage = np.zeros((n_chunks, TILE_N))
    cn_stage[:, :vc] = cn.T
    cn_flat = cn_stage.reshape(-1)
    qn_cols = np.zeros((n_chunks, TILE_M))
    qn_cols[:, :vq] = qn.T

    cursor = ChunkCursor(chunk_index=0, accumulated=np.zeros((TILE_M, TILE_N)))
    pruned = False
    while cursor.chunk_index < n_chunks:
        j = cursor.chunk_index
        a = load_tile_row_major(qflat, TILE_K * j, width, TILE_M, TILE_K)
        scale_tile(a, -2.0)
        b = load_tile_col_major(cflat, TILE_K * j, width, TILE_K, TILE_N)
        c = load_tile_row_major(cn_flat, TILE_N * j, 0, TILE_M, TILE_N)
        d = mma(a, b, c)
        cursor.accumulated += d.data
        cursor.accumulated += qn_cols[j][:, None]  # query-norm term, scalar side
        cursor.chunk_index = j + 1
        if short_circuit and cursor.chunk_index < n_chunks:
            if np.all(cursor.accumulated[:vq, :vc] > epsilon_sq):
                pruned = True
                break
    result = cursor.accumulated
    if not pruned:
        np.maximum(result, 0.0, out=result)  # cancellation clamp
    return DistanceTile(
        sq_dists=result,
        valid_queries=vq,
        valid_candidates=vc,
        pruned=pruned,
        chunks_executed=cursor.chunk_index,
    )


def _padded_flat(block: np.ndarray, rows: int) -> np.ndarray:
    if block.shape[0] == rows:
        return block.reshape(-1) if block.flags.c_contiguous else block.copy().reshape(-1)
    padded = np.zeros((rows, block.shape[1]))
    padded[: block.shape[0]] = block
    return padded.reshape(-1)


def scalar_distance_sq(a, b, epsilon_sq: float = math.inf, short_circuit: bool = False):
    """Plain running sum of squared coordinate differences.

    The reference refinement kernel: dimensions accumulate in ascending
    order, and with ``short_circuit`` the sum is abandoned as soon as the
    partial exceeds ``epsilon_sq``, returning the PRUNED marker.  Partial
    sums of squares never decrease, so pruning is exact.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    acc = 0.0
    for i in range(a.shape[0]):
        diff = a[i] - b[i]
        acc += diff * diff
        if short_circuit and acc > epsilon_sq:
            return PRUNED
    return float(acc)
