"""Fixed-shape FP64 tile engine.

Software stand-in for a warp-level matrix-fragment API: operand tiles of
shape 8x4 and 4x8, accumulator tiles of shape 8x8, with strided load and
store, fill, elementwise scaling, and a fused multiply-accumulate
``D = A x B + C``.

Unlike the hardware it models, element order and rounding are pinned so
results are bit-reproducible: tiles use a row-major internal layout, the
multiply-accumulate sums the inner dimension in ascending order, and the
accumulator term is added last.  One call is one logically atomic tile
operation; tiles are plain values and carry no shared state.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .errors import BoundsError, ValidationError

TILE_M = 8  # accumulator rows
TILE_N = 8  # accumulator columns
TILE_K = 4  # inner dimension of the multiply


class _Tile:
    """Base for the three fixed shapes; holds a row-major float64 block."""

    rows: int
    cols: int

    __slots__ = ("data",)

    def __init__(self, data=None):
        if data is None:
            self.data = np.zeros((self.rows, self.cols))
            return
        arr = np.asarray(data, dtype=np.float64)
        if arr.shape != (self.rows, self.cols):
            raise ValidationError(
                f"{type(self).__name__} holds a {self.rows}x{self.cols} block, "
                f"got shape {arr.shape}"
            )
        self.data = arr

    def __repr__(self):
        return f"{type(self).__name__}({self.data!r})"


class TileA(_Tile):
    """8x4 left operand tile."""

    rows, cols = TILE_M, TILE_K


class TileB(_Tile):
    """4x8 right operand tile."""

    rows, cols = TILE_K, TILE_N


class TileAcc(_Tile):
    """8x8 accumulator tile."""

    rows, cols = TILE_M, TILE_N


_SHAPE_TO_TILE = {
    (TILE_M, TILE_K): TileA,
    (TILE_K, TILE_N): TileB,
    (TILE_M, TILE_N): TileAcc,
}


def _as_flat_buffer(source) -> np.ndarray:
    buf = np.asarray(source, dtype=np.float64)
    if buf.ndim != 1:
        raise ValidationError(f"tile buffers are flat 1-D arrays, got ndim={buf.ndim}")
    if not buf.flags.c_contiguous:
        buf = np.ascontiguousarray(buf)
    return buf


def _check_region(size, offset, stride, major, minor, what, axis):
    """Addresses touched are offset + i*stride + j for i < major, j < minor."""
    if offset < 0:
        raise BoundsError(f"{what}: negative offset {offset}")
    if stride < 0:
        raise BoundsError(f"{what}: negative stride {stride}")
    if offset + (major - 1) * stride + minor <= size:
        return
    for i in range(major):
        start = offset + i * stride
        if start + minor > size:
            raise BoundsError(
                f"{what}: {axis} {i} covers elements [{start}, {start + minor}) "
                f"but the buffer holds {size}"
            )


def load_tile_row_major(source, offset: int, stride: int, rows: int, cols: int):
    """Load a tile whose element (r, c) is ``source[offset + r*stride + c]``.

    The stride is in elements and may be 0 (every row reads the same
    region, replicating it) or smaller than ``cols`` (rows overlap).
    Loading copies values verbatim; nothing is reordered or rounded.
    """
    cls = _SHAPE_TO_TILE.get((rows, cols))
    if cls is None:
        raise ValidationError(f"no tile shape {rows}x{cols}; valid: 8x4, 4x8, 8x8")
    buf = _as_flat_buffer(source)
    _check_region(buf.size, offset, stride, rows, cols, "row-major load", "row")
    item = buf.itemsize
    view = as_strided(buf[offset:], shape=(rows, cols), strides=(stride * item, item))
    return cls(view.copy())


def load_tile_col_major(source, offset: int, stride: int, rows: int, cols: int) -> TileB:
    """Load a 4x8 operand with column-major addressing.

    Element (r, c) is ``source[offset + c*stride + r]``, i.e. the result is
    the transpose of a row-major load of the same region with swapped
    row/column counts.
    """
    if (rows, cols) != (TILE_K, TILE_N):
        raise ValidationError(
            f"column-major loads produce the {TILE_K}x{TILE_N} operand tile, "
            f"got {rows}x{cols}"
        )
    buf = _as_flat_buffer(source)
    _check_region(buf.size, offset, stride, cols, rows, "column-major load", "column")
    item = buf.itemsize
    view = as_strided(buf[offset:], shape=(rows, cols), strides=(item, stride * item))
    return TileB(view.copy())


def fill_tile(tile, value: float):
    """Set every element of the tile to ``value``; returns the tile."""
    tile.data.fill(float(value))
    return tile


def scale_tile(tile, factor: float):
    """Multiply every element by ``factor`` (elementwise IEEE-754 FP64).

    Applied uniformly to all elements, map-style; returns the tile.
    """
    tile.data *= factor
    return tile


def mma(a: TileA, b: TileB, c: TileAcc) -> TileAcc:
    """Fused multiply-accumulate ``D(r,c) = sum_k A(r,k)*B(k,c) + C(r,c)``.

    The inner sum runs over k in ascending order and the C term is added
    last, so results are bit-reproducible and match a scalar triple loop
    with the same order exactly.
    """
    if not isinstance(a, TileA) or not isinstance(b, TileB) or not isinstance(c, TileAcc):
        raise ValidationError("mma expects (TileA, TileB, TileAcc) operands")
    d = np.zeros((TILE_M, TILE_N))
    for k in range(TILE_K):  # ascending k pins the rounding order
        d += np.multiply.outer(a.data[:, k], b.data[k, :])
    d += c.data  # accumulator term appended last
    return TileAcc(d)


def store_tile(tile, dest: np.ndarray, offset: int, stride: int) -> None:
    """Write the tile so ``dest[offset + r*stride + c] = tile(r,c)``.

    Elements outside the addressed region keep their prior values.  Rows
    are written in ascending order, so overlapping regions (stride smaller
    than the column count) end up with the later row's values.
    """
    if (
        not isinstance(dest, np.ndarray)
        or dest.dtype != np.float64
        or dest.ndim != 1
        or not dest.flags.c_contiguous
        or not dest.flags.writeable
    ):
        raise ValidationError("store destination must be a writable contiguous 1-D float64 array")
    rows, cols = tile.data.shape
    _check_region(dest.size, offset, stride, rows, cols, "store", "row")
    if stride >= cols:
        item = dest.itemsize
        view = as_strided(dest[offset:], shape=(rows, cols), strides=(stride * item, item))
        view[:] = tile.data
    else:
        for r in range(rows):
            start = offset + r * stride
            dest[start : start + cols] = tile.data[r]
