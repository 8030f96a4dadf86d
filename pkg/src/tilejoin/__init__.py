"""FP64 epsilon self-join on a software tile multiply-accumulate engine."""

from .datasets import (
    Dataset,
    GenSpec,
    generate,
    read_dataset,
    reorder_dims_by_variance,
    write_dataset,
)
from .errors import BoundsError, ParseError, ResourceError, ValidationError
from .grid import GridIndex, build_index, candidates_for_cell, neighbor_cells
from .join import (
    BatchPlan,
    JoinConfig,
    JoinResult,
    JoinStats,
    join_stats,
    plan_batches,
    selectivity,
    self_join,
)
from .kernels import (
    PRUNED,
    ChunkCursor,
    ChunkNorms,
    DistanceTile,
    cancellation_floor,
    distance_tile_v1,
    distance_tile_v2,
    leading_identity,
    precompute_chunk_norms,
    scalar_distance_sq,
)
from .oracle import OraclePairSet, brute_force_join, naive_mma
from .tiles import (
    TILE_K,
    TILE_M,
    TILE_N,
    TileA,
    TileAcc,
    TileB,
    fill_tile,
    load_tile_col_major,
    load_tile_row_major,
    mma,
    scale_tile,
    store_tile,
)

__version__ = "0.1.0"
