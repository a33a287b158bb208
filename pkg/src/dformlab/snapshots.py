"""Binary field snapshots.

Layout (all little-endian): magic b"DFL1", u32 resolution, f64 L, f64 nu,
f64 time, then the two velocity components' spectral coefficients as
interleaved (re, im) f64 pairs, row-major in k-index order.  Writing and
reading move raw coefficient bytes, so a round-trip is bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SnapshotFormatError
from .spectral import Grid, SpectralField

MAGIC = b"DFL1"
_HEADER = struct.Struct("<4sIddd")


@dataclass(frozen=True)
class Snapshot:
    """A stored field plus the run metadata the format carries."""

    field: SpectralField
    nu: float
    time: float


def save_snapshot(
    field: SpectralField, path: str | Path, *, nu: float = 0.0, time: float = 0.0
) -> Path:
    """Write a field (with optional viscosity/time stamps); returns the path."""
    grid = field.grid
    coeff = np.ascontiguousarray(field.coeff, dtype="<c16")
    payload = _HEADER.pack(MAGIC, grid.n, grid.L, nu, time) + coeff.tobytes()
    path = Path(path)
    path.write_bytes(payload)
    return path


def read_snapshot(path: str | Path) -> Snapshot:
    """Read a snapshot with its metadata; structural problems raise
    SnapshotFormatError with an explicit code and leave nothing half-built."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise SnapshotFormatError(
            f"file is {len(raw)} bytes, shorter than the {_HEADER.size}-byte header",
            code="truncated",
        )
    magic, n, L, nu, time = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotFormatError(
            f"bad magic bytes {magic!r}; expected {MAGIC!r}", code="bad-magic"
        )
    if n < 2 or not np.isfinite(L) or L <= 0:
        raise SnapshotFormatError(
            f"implausible header: resolution {n}, L {L}", code="bad-header"
        )
    expected = 2 * n * (n // 2 + 1) * 16
    body = raw[_HEADER.size :]
    if len(body) < expected:
        raise SnapshotFormatError(
            f"coefficient payload is {len(body)} bytes; expected {expected}",
            code="truncated",
        )
    if len(body) > expected:
        raise SnapshotFormatError(
            f"{len(body) - expected} unexpected trailing bytes", code="trailing-bytes"
        )
    coeff = np.frombuffer(body, dtype="<c16").reshape(2, n, n // 2 + 1).copy()
    return Snapshot(field=SpectralField(Grid(n, L), coeff), nu=nu, time=time)


def load_snapshot(path: str | Path) -> SpectralField:
    """Read just the field."""
    return read_snapshot(path).field
