"""Epsilon self-join driver.

Pipeline: (optionally) reorder dimensions by variance, build the grid
index, precompute chunk norms, plan batches of cells, then refine cell by
cell: queries are taken eight at a time from one cell, the cell's shared
candidate list streams through the expanded-form distance tile eight
points at a time, and pairs with squared distance <= epsilon^2 are
emitted.  A scalar kernel (the running-sum refinement the tile algorithm
is measured against) is available behind the same driver; every
configuration knob changes performance only, never the pair set.

The final pair list is canonically sorted by (query id, neighbor id), so
results are identical regardless of kernel, batching, or thread count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .datasets import Dataset, reorder_dims_by_variance
from .errors import ResourceError, ValidationError
from .grid import GridIndex, build_index, candidates_for_cell, default_k_idx
from .kernels import TILE_M, TILE_N, ChunkNorms, distance_tile_v2, precompute_chunk_norms


@dataclass(frozen=True)
class JoinConfig:
    """Join parameters; only epsilon affects which pairs are returned.

    kernel: 'tile' routes refinement through the 8x8 distance tiles,
    'scalar' through the per-pair running sum.  batch_size is a target
    number of estimated result pairs per batch (None = one batch).
    k_idx defaults to min(d, 6).
    """

    epsilon: float
    kernel: str = "tile"
    short_circuit: bool = True
    k_idx: int | None = None
    batch_size: int | None = None
    thread_count: int = 1
    reorder_dims: bool = False


@dataclass
class JoinStats:
    """Counters and phase timings from one join run."""

    tiles_processed: int = 0
    chunks_executed: int = 0
    chunks_skipped: int = 0
    candidates_refined: int = 0
    pairs_emitted: int = 0
    index_seconds: float = 0.0
    refine_seconds: float = 0.0
    total_seconds: float = 0.0

    @property
    def pairs_per_second(self) -> float:
        return self.pairs_emitted / self.total_seconds if self.total_seconds > 0 else 0.0

    def as_dict(self) -> dict:
        return {
            "tiles_processed": self.tiles_processed,
            "chunks_executed": self.chunks_executed,
            "chunks_skipped": self.chunks_skipped,
            "candidates_refined": self.candidates_refined,
            "pairs_emitted": self.pairs_emitted,
            "index_seconds": self.index_seconds,
            "refine_seconds": self.refine_seconds,
            "total_seconds": self.total_seconds,
            "pairs_per_second": self.pairs_per_second,
        }


@dataclass
class JoinResult:
    """Pair set of the join: ordered (query id, neighbor id), self-pairs included.

    pairs is an (m, 2) int64 array sorted ascending by (query id,
    neighbor id); selectivity is (|R| - n) / n.
    """

    pairs: np.ndarray
    total_pairs: int
    selectivity: float
    stats: JoinStats


@dataclass(frozen=True)
class BatchPlan:
    """Cell ranges (into the index's lexicographic cell list) per batch."""

    batches: list  # of (start, stop) half-open ranges
    estimated_pairs: list  # same length, estimate per batch


def selectivity(result: JoinResult, n: int) -> float:
    """Average neighbors per query excluding self: (|R| - n) / n."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    return (result.total_pairs - n) / n


def join_stats(result: JoinResult) -> JoinStats:
    """Instrumentation record of a completed run."""
    return result.stats


def plan_batches(index: GridIndex, config: JoinConfig) -> BatchPlan:
    """Greedily pack cells into batches up to the estimated pair budget.

    The estimate for a cell is |cell| * |candidates(cell)|; a batch closes
    once its running estimate reaches config.batch_size, so batches
    overshoot by at most one cell.  Batches partition the cell list in
    lexicographic order.
    """
    sizes = [
        len(index.cells[c]) * len(candidates_for_cell(index, c)) for c in index.ordered_cells
    ]
    return _plan_from_estimates(sizes, config.batch_size)


def _plan_from_estimates(cell_estimates, batch_size) -> BatchPlan:
    if batch_size is not None and batch_size < 1:
        raise ValidationError(f"batch_size must be >= 1, got {batch_size}")
    n_cells = len(cell_estimates)
    if batch_size is None:
        return BatchPlan(batches=[(0, n_cells)], estimated_pairs=[sum(cell_estimates)])
    batches = []
    estimates = []
    start = 0
    acc = 0
    for i, est in enumerate(cell_estimates):
        acc += est
        if acc >= batch_size:
            batches.append((start, i + 1))
            estimates.append(acc)
            start, acc = i + 1, 0
    if start < n_cells:
        batches.append((start, n_cells))
        estimates.append(acc)
    return BatchPlan(batches=batches, estimated_pairs=estimates)


def self_join(dataset, config: JoinConfig, max_result_pairs: int | None = None) -> JoinResult:
    """Find every ordered pair within config.epsilon, self-pairs included.

    The pair set depends only on the data and epsilon; kernel choice,
    short-circuiting, batch size, thread count, and dimension reordering
    trade performance, not results.  ``max_result_pairs`` caps the result
    container and raises ResourceError naming the offending batch.
    """
    t_start = time.perf_counter()
    if not isinstance(dataset, Dataset):
        dataset = Dataset(dataset)
    _validate_config(config)
    work = dataset
    if config.reorder_dims and dataset.n >= 2:
        work, _ = reorder_dims_by_variance(dataset)

    k_idx = config.k_idx if config.k_idx is not None else default_k_idx(work.d)
    index = build_index(work, config.epsilon, k_idx)
    norms = precompute_chunk_norms(work)
    cand_lists = [candidates_for_cell(index, c) for c in index.ordered_cells]
    plan = _plan_from_estimates(
        [len(index.cells[c]) * len(cands) for c, cands in zip(index.ordered_cells, cand_lists)],
        config.batch_size,
    )
    t_indexed = time.perf_counter()

    eps_sq = config.epsilon * config.epsilon
    refine = _TileRefiner(work, norms, eps_sq, config.short_circuit) \
        if config.kernel == "tile" else _ScalarRefiner(work, eps_sq, config.short_circuit)

    cell_ids = [index.cells[c] for c in index.ordered_cells]
    stats = JoinStats()
    parts = []
    total = 0
    for batch_no, (start, stop) in enumerate(plan.batches):
        tasks = [(cell_ids[i], cand_lists[i]) for i in range(start, stop)]
        if config.thread_count > 1:
            with ThreadPoolExecutor(max_workers=config.thread_count) as pool:
                outs = list(pool.map(lambda t: refine(*t), tasks))
        else:
            outs = [refine(*t) for t in tasks]
        for out in outs:
            parts.append(out.pairs)
            total += len(out.pairs)
            stats.tiles_processed += out.tiles
            stats.chunks_executed += out.chunks_executed
            stats.chunks_skipped += out.chunks_skipped
            stats.candidates_refined += out.refined
        if max_result_pairs is not None and total > max_result_pairs:
            raise ResourceError(
                f"batch {batch_no}: result grew to {total} pairs, "
                f"beyond the container capacity of {max_result_pairs}"
            )
    pairs = np.concatenate(parts) if parts else np.empty((0, 2), dtype=np.int64)
    pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    t_end = time.perf_counter()
    stats.pairs_emitted = total
    stats.index_seconds = t_indexed - t_start
    stats.refine_seconds = t_end - t_indexed
    stats.total_seconds = t_end - t_start
    return JoinResult(
        pairs=pairs,
        total_pairs=total,
        selectivity=(total - dataset.n) / dataset.n,
        stats=stats,
    )


def _validate_config(config: JoinConfig) -> None:
    if not np.isfinite(config.epsilon) or config.epsilon <= 0:
        raise ValidationError(f"epsilon must be positive and finite, got {config.epsilon}")
    if config.kernel not in ("tile", "scalar"):
        raise ValidationError(f"kernel must be 'tile' or 'scalar', got {config.kernel!r}")
    if config.batch_size is not None and config.batch_size < 1:
        raise ValidationError(f"batch_size must be >= 1, got {config.batch_size}")
    if config.thread_count < 1:
        raise ValidationError(f"thread_count must be >= 1, got {config.thread_count}")


@dataclass
class _CellOutput:
    pairs: np.ndarray
    tiles: int = 0
    chunks_executed: int = 0
    chunks_skipped: int = 0
    refined: int = 0


class _TileRefiner:
    """Refines one cell's queries against its candidates through 8x8 tiles."""

    def __init__(self, work: Dataset, norms: ChunkNorms, eps_sq: float, short_circuit: bool):
        self.coords = work.coords
        self.norms = norms.values
        self.n_chunks = norms.n_chunks
        self.eps_sq = eps_sq
        self.short_circuit = short_circuit

    def __call__(self, qids: np.ndarray, cand_ids: np.ndarray) -> _CellOutput:
        qcoords = self.coords[qids]
        ccoords = self.coords[cand_ids]
        qnorms = self.norms[qids]
        cnorms = self.norms[cand_ids]
        eps_sq = self.eps_sq
        out_i = []
        out_j = []
        tiles = chunks = skipped = refined = 0
        for g in range(0, len(qids), TILE_M):
            qg = qcoords[g : g + TILE_M]
            qn = qnorms[g : g + TILE_M]
            gids = qids[g : g + TILE_M]
            for b in range(0, len(cand_ids), TILE_N):
                tile = distance_tile_v2(
                    qg,
                    ccoords[b : b + TILE_N],
                    qn,
                    cnorms[b : b + TILE_N],
                    eps_sq,
                    self.short_circuit,
                )
                tiles += 1
                chunks += tile.chunks_executed
                skipped += self.n_chunks - tile.chunks_executed
                refined += tile.valid_queries * tile.valid_candidates
                if not tile.pruned:
                    rr, cc = np.nonzero(tile.valid <= eps_sq)
                    if rr.size:
                        out_i.append(gids[rr])
                        out_j.append(cand_ids[b : b + TILE_N][cc])
        if out_i:
            pairs = np.column_stack([np.concatenate(out_i), np.concatenate(out_j)]).astype(np.int64)
        else:
            pairs = np.empty((0, 2), dtype=np.int64)
        return _CellOutput(pairs, tiles, chunks, skipped, refined)


class _ScalarRefiner:
    """Per-query running-sum refinement, vectorized across the candidate axis.

    Dimensions accumulate in ascending order with exactly the arithmetic
    of scalar_distance_sq, so per-pair values are bit-identical to the
    single-pair kernel; with short-circuiting, candidates whose partial
    sum already exceeds epsilon^2 are dropped between unroll blocks of
    min(8, d) dimensions.
    """

    def __init__(self, work: Dataset, eps_sq: float, short_circuit: bool):
        self.coords = np.ascontiguousarray(work.logical)
        self.d = work.d
        self.eps_sq = eps_sq
        self.short_circuit = short_circuit
        self.unroll = min(8, work.d)

    def __call__(self, qids: np.ndarray, cand_ids: np.ndarray) -> _CellOutput:
        cc = self.coords[cand_ids]
        d = self.d
        eps_sq = self.eps_sq
        out_i = []
        out_j = []
        refined = 0
        for qid in qids:
            q = self.coords[qid]
            refined += len(cand_ids)
            if not self.short_circuit:
                acc = np.zeros(len(cand_ids))
                for dim in range(d):
                    diff = q[dim] - cc[:, dim]
                    acc += diff * diff
                keep = np.nonzero(acc <= eps_sq)[0]
            else:
                keep = self._short_circuit_refine(q, cc)
            if keep.size:
                out_i.append(np.full(keep.size, qid, dtype=np.int64))
                out_j.append(cand_ids[keep])
        if out_i:
            pairs = np.column_stack([np.concatenate(out_i), np.concatenate(out_j)]).astype(np.int64)
        else:
            pairs = np.empty((0, 2), dtype=np.int64)
        return _CellOutput(pairs, refined=refined)

    def _short_circuit_refine(self, q: np.ndarray, cands: np.ndarray) -> np.ndarray:
        alive = np.arange(len(cands))
        cur = cands
        acc = np.zeros(len(cands))
        pos = 0
        while pos < self.d:
            stop = min(pos + self.unroll, self.d)
            for dim in range(pos, stop):
                diff = q[dim] - cur[:, dim]
                acc += diff * diff
            pos = stop
            if pos < self.d:
                keep = acc <= self.eps_sq
                if not keep.all():
                    alive = alive[keep]
                    if alive.size == 0:
                        return alive
                    cur = cur[keep]
                    acc = acc[keep]
        return alive[acc <= self.eps_sq]
