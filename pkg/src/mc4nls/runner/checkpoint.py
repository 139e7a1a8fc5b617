"""Binary checkpoints of a field.

Byte layout (all little-endian, 64-byte header)::

    offset  size  type      content
    0       8     bytes     magic b"MC4NLSCK"
    8       4     uint32    format version (currently 1)
    12      4     uint32    geometry kind: 0 full periodic grid, 1 radial grid
                                (fourth order), 2 radial grid (second order)
    16      4     uint32    dimension n
    20      4     uint32    points per axis P (full) or radial node count N_r
    24      8     float64   half width L (full) or r_max (radial)
    32      8     float64   time t
    40      8     float64   last step size dt
    48      8     uint64    number of complex values that follow
    56      4     uint32    CRC-32 of the payload
    60      4     uint32    CRC-32 of bytes 0..59

followed by the values as complex128 (real, imaginary float64 pairs) in
C order of the grid (``P**n`` values, or ``N_r`` for radial grids).
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..fields import ComplexField
from ..grid import RadialGrid, make_grid, make_radial_grid

MAGIC = b"MC4NLSCK"
VERSION = 1
_BODY = struct.Struct("<8sIIIIdddQI")
_HEADER_SIZE = _BODY.size + 4
KIND_FULL, KIND_RADIAL, KIND_RADIAL2 = 0, 1, 2


class CheckpointError(ValueError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class GeometryMismatchError(CheckpointError):
    pass


@dataclass(frozen=True)
class Checkpoint:
    field: ComplexField
    dt: float
    version: int = VERSION

    @property
    def t(self) -> float:
        return self.field.time_tag


def _describe(geometry) -> tuple[int, int, int, float]:
    if isinstance(geometry, RadialGrid):
        kind = KIND_RADIAL if geometry.order == 4 else KIND_RADIAL2
        return kind, geometry.dim, geometry.n_points, geometry.r_max
    return KIND_FULL, geometry.dim, geometry.points_per_axis, geometry.half_width


def save_checkpoint(state: ComplexField, path, dt: float = 0.0) -> Path:
    path = Path(path)
    kind, n, npts, extent = _describe(state.geometry)
    t = 0.0 if state.time_tag is None else float(state.time_tag)
    payload = np.ascontiguousarray(state.values, dtype="<c16").tobytes()
    body = _BODY.pack(MAGIC, VERSION, kind, n, npts, float(extent), t, float(dt),
                      state.values.size, zlib.crc32(payload))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body)))
        fh.write(payload)
    return path


def load_checkpoint(path) -> Checkpoint:
    data = Path(path).read_bytes()
    if len(data) < _HEADER_SIZE:
        raise CorruptCheckpointError(f"{path}: truncated header ({len(data)} of {_HEADER_SIZE} bytes)")
    body = data[:_BODY.size]
    magic, version, kind, n, npts, extent, t, dt, count, crc_payload = _BODY.unpack(body)
    if magic != MAGIC:
        raise CorruptCheckpointError(f"{path}: bad magic {magic!r}")
    (crc_header,) = struct.unpack("<I", data[_BODY.size:_HEADER_SIZE])
    if zlib.crc32(body) != crc_header:
        raise CorruptCheckpointError(f"{path}: header checksum mismatch")
    if version != VERSION:
        raise CheckpointVersionError(f"{path}: format version {version}, this build reads version {VERSION}")
    payload = data[_HEADER_SIZE:]
    if len(payload) != 16 * count:
        raise CorruptCheckpointError(f"{path}: payload holds {len(payload)} bytes, header promises {16 * count}")
    if zlib.crc32(payload) != crc_payload:
        raise CorruptCheckpointError(f"{path}: payload checksum mismatch")
    if kind == KIND_FULL:
        geometry = make_grid(n, npts, extent)
    elif kind in (KIND_RADIAL, KIND_RADIAL2):
        geometry = make_radial_grid(n, npts, extent, 4 if kind == KIND_RADIAL else 2)
    else:
        raise CorruptCheckpointError(f"{path}: unknown geometry kind {kind}")
    shape = geometry.shape if kind == KIND_FULL else (npts,)
    if int(np.prod(shape)) != count:
        raise CorruptCheckpointError(f"{path}: {count} values do not fit geometry of shape {shape}")
    values = np.frombuffer(payload, dtype="<c16").reshape(shape).astype(complex)
    return Checkpoint(ComplexField(geometry, values, t), dt, version)


def check_geometry(ck: Checkpoint, kind: str, n: int, points: int, extent: float, order: int = 4) -> None:
    """Raise :class:`GeometryMismatchError` unless the checkpoint lives on the given grid."""
    got = _describe(ck.field.geometry)
    code = KIND_FULL if kind != "radial" else (KIND_RADIAL if order == 4 else KIND_RADIAL2)
    want = (code, n, points, float(extent))
    if got != want:
        names = ("kind", "n", "points", "extent")
        diffs = ", ".join(f"{k}: checkpoint {a} vs config {b}" for k, a, b in zip(names, got, want) if a != b)
        raise GeometryMismatchError(f"checkpoint geometry does not match the configuration ({diffs})")
