"""Point-set container, synthetic generators, dimension reordering, file I/O.

Coordinates are row-major FP64.  Internally every dataset is padded with
zero columns up to a multiple of four, because the distance kernels
consume coordinates four dimensions at a time; the logical dimensionality
is kept separate and files never store the padding.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, ValidationError

DEFAULT_EXPONENTIAL_RATE = 40.0

_MAGIC = b"TEDJ"
_BINARY_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")  # magic, version u32, n u64, d u64


def _padded_width(d: int) -> int:
    return -(-d // 4) * 4


class Dataset:
    """n points in d dimensions, padded to d_padded columns with zeros."""

    __slots__ = ("n", "d", "d_padded", "coords")

    def __init__(self, points):
        arr = np.asarray(points, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError(f"points must be an (n, d) array, got ndim={arr.ndim}")
        n, d = arr.shape
        if n < 1 or d < 1:
            raise ValidationError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
        if not np.isfinite(arr).all():
            p, dim = np.argwhere(~np.isfinite(arr))[0]
            raise ValidationError(f"non-finite coordinate at point {p}, dimension {dim}")
        self.n = n
        self.d = d
        self.d_padded = _padded_width(d)
        coords = np.zeros((n, self.d_padded))
        coords[:, :d] = arr
        self.coords = coords

    @property
    def logical(self) -> np.ndarray:
        """The (n, d) view without padding columns."""
        return self.coords[:, : self.d]

    def checksum(self) -> str:
        """SHA-256 over (n, d) and the logical coordinate bytes, little-endian."""
        h = hashlib.sha256()
        h.update(struct.pack("<QQ", self.n, self.d))
        h.update(np.ascontiguousarray(self.logical).astype("<f8", copy=False).tobytes())
        return h.hexdigest()

    def __repr__(self):
        return f"Dataset(n={self.n}, d={self.d})"


@dataclass(frozen=True)
class GenSpec:
    """Recipe for a synthetic dataset; the same spec regenerates identical bytes.

    ``distribution`` is 'uniform' or 'exponential'.  Exponential draws use
    the given rate and are resampled until they fall in [0, 1), which
    skews mass toward the origin.
    """

    distribution: str
    n: int
    d: int
    seed: int = 0
    rate: float = DEFAULT_EXPONENTIAL_RATE


def generate(spec: GenSpec) -> Dataset:
    """Generate a dataset from a spec, deterministically.

    Each dimension draws from its own PCG64 stream spawned from the seed
    via SeedSequence, so the output is reproducible across platforms and
    independent of how many points other dimensions rejected.
    """
    if spec.distribution not in ("uniform", "exponential"):
        raise ValidationError(f"unknown distribution {spec.distribution!r}")
    if spec.n < 1 or spec.d < 1:
        raise ValidationError(f"need n >= 1 and d >= 1, got n={spec.n}, d={spec.d}")
    if spec.distribution == "exponential" and not spec.rate > 0:
        raise ValidationError(f"exponential rate must be positive, got {spec.rate}")
    streams = np.random.SeedSequence(spec.seed).spawn(spec.d)
    cols = np.empty((spec.n, spec.d))
    for j, ss in enumerate(streams):
        rng = np.random.Generator(np.random.PCG64(ss))
        if spec.distribution == "uniform":
            cols[:, j] = rng.random(spec.n)
        else:
            draw = rng.exponential(1.0 / spec.rate, spec.n)
            bad = draw >= 1.0
            while bad.any():
                draw[bad] = rng.exponential(1.0 / spec.rate, int(bad.sum()))
                bad = draw >= 1.0
            cols[:, j] = draw
    return Dataset(cols)


def reorder_dims_by_variance(dataset: Dataset):
    """Permute columns so per-dimension variance is non-increasing.

    Returns (reordered dataset, permutation); column j of the result is
    column permutation[j] of the input.  Ties keep their original order.
    """
    if dataset.n < 2:
        raise ValidationError("variance reordering needs at least 2 points")
    variances = dataset.logical.var(axis=0)
    perm = np.argsort(-variances, kind="stable")
    return Dataset(dataset.logical[:, perm]), perm


def write_dataset(dataset: Dataset, path, format: str = "binary") -> None:
    """Write the logical coordinates; padding is never stored.

    binary: header (magic TEDJ, version u32=1, n u64, d u64, little-endian)
    followed by n*d float64 little-endian values, row-major.
    csv: one point per line, comma-separated, shortest round-trip decimals.
    """
    if format == "binary":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(_MAGIC, _BINARY_VERSION, dataset.n, dataset.d))
            fh.write(np.ascontiguousarray(dataset.logical).astype("<f8", copy=False).tobytes())
    elif format == "csv":
        with open(path, "w") as fh:
            for row in dataset.logical:
                fh.write(",".join(repr(v) for v in row.tolist()))
                fh.write("\n")
    else:
        raise ValidationError(f"unknown dataset format {format!r}")


def read_dataset(path, format: str | None = None) -> Dataset:
    """Read a dataset file; with format=None the binary magic is sniffed."""
    if format is None:
        with open(path, "rb") as fh:
            format = "binary" if fh.read(4) == _MAGIC else "csv"
    if format == "binary":
        return _read_binary(path)
    if format == "csv":
        return _read_csv(path)
    raise ValidationError(f"unknown dataset format {format!r}")


def _read_binary(path) -> Dataset:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise ParseError(f"{path}: truncated header, got {len(header)} bytes")
        magic, version, n, d = _HEADER.unpack(header)
        if magic != _MAGIC:
            raise ParseError(f"{path}: bad magic {magic!r} at offset 0")
        if version != _BINARY_VERSION:
            raise ParseError(f"{path}: unsupported version {version} at offset 4")
        payload = fh.read()
    expected = n * d * 8
    if len(payload) != expected:
        raise ParseError(
            f"{path}: payload holds {len(payload)} bytes at offset {_HEADER.size}, "
            f"expected {expected} for n={n}, d={d}"
        )
    coords = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(n, d)
    return Dataset(coords)


def _read_csv(path) -> Dataset:
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise ValidationError(
                    f"{path}: line {lineno} has {len(fields)} fields, expected {width}"
                )
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return Dataset(np.asarray(rows))
