"""Voxel file formats: the FFVX container and legacy VTK structured points.

FFVX layout (little-endian, 24-byte header)::

    offset  size  content
    0       4     magic b"FFVX"
    4       4     u32 version (= 1)
    8       12    u32 n1, n2, n3
    20      1     u8 dtype: 0 = u8 phase ids, 1 = f32 scalars
    21      3     reserved (zero)
    24      ...   payload, i fastest, then j, then k
"""

import os
import struct

import numpy as np

from .exceptions import VoxelFormatError
from .microstructure import PhaseMap

__all__ = [
    "FFVX_MAGIC",
    "FFVX_VERSION",
    "save_voxel",
    "load_voxel",
    "load_phase_map",
    "load_scalar_field",
    "write_structured_points",
]

FFVX_MAGIC = b"FFVX"
FFVX_VERSION = 1
_HEADER = struct.Struct("<4sI3IB3x")
_DTYPES = {0: np.dtype("<u1"), 1: np.dtype("<f4")}


def save_voxel(data, path):
    """Write a phase map (u8) or scalar field (stored as f32) to ``path``."""
    if isinstance(data, PhaseMap):
        array = data.phases
    else:
        array = np.asarray(data)
    if array.ndim != 3:
        raise ValueError(f"FFVX stores 3-dimensional fields, got shape {array.shape}")
    if array.dtype == np.uint8:
        code = 0
    elif np.issubdtype(array.dtype, np.floating):
        code = 1
    else:
        raise VoxelFormatError(f"cannot store dtype {array.dtype}; use uint8 phase ids or floats")
    payload = np.asarray(array, dtype=_DTYPES[code]).ravel(order="F")
    header = _HEADER.pack(FFVX_MAGIC, FFVX_VERSION, *array.shape, code)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def load_voxel(path):
    """Read an FFVX file; returns a uint8 or float32 array of shape ``(n1, n2, n3)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise VoxelFormatError(f"{path}: file has {len(raw)} bytes, shorter than the {_HEADER.size}-byte header")
    magic, version, n1, n2, n3, code = _HEADER.unpack_from(raw)
    if magic != FFVX_MAGIC:
        raise VoxelFormatError(f"{path}: bad magic {magic!r}, expected {FFVX_MAGIC!r}")
    if version != FFVX_VERSION:
        raise VoxelFormatError(f"{path}: unsupported FFVX version {version}")
    if code not in _DTYPES:
        raise VoxelFormatError(f"{path}: unknown dtype code {code}")
    if min(n1, n2, n3) < 1:
        raise VoxelFormatError(f"{path}: invalid dimensions {(n1, n2, n3)}")
    dtype = _DTYPES[code]
    expected = _HEADER.size + n1 * n2 * n3 * dtype.itemsize
    if len(raw) != expected:
        kind = "truncated" if len(raw) < expected else "oversized"
        raise VoxelFormatError(f"{path}: {kind} payload, expected {expected} bytes in total, found {len(raw)}")
    flat = np.frombuffer(raw, dtype=dtype, offset=_HEADER.size)
    return flat.reshape((n1, n2, n3), order="F").astype(dtype.newbyteorder("="), copy=True)


def load_phase_map(path, h=1.0):
    """Read an FFVX file holding phase ids."""
    array = load_voxel(path)
    if array.dtype != np.uint8:
        raise VoxelFormatError(f"{path}: expected u8 phase ids, found {array.dtype} scalars")
    return PhaseMap(array, h=h, info={"source": os.fspath(path)})


def load_scalar_field(path):
    """Read an FFVX file holding f32 scalars, widened to float64."""
    array = load_voxel(path)
    if array.dtype != np.float32:
        raise VoxelFormatError(f"{path}: expected f32 scalars, found {array.dtype} phase ids")
    return array.astype(np.float64)


def _write_block(fh, values):
    np.savetxt(fh, values, fmt="%.9g")


def write_structured_points(path, shape, spacing=1.0, scalars=None, vectors=None, title="fracflow"):
    """Write voxel data as an ASCII legacy VTK ``STRUCTURED_POINTS`` file.

    Every voxel is one cell, so the point lattice has ``n + 1`` points per
    axis. ``scalars`` maps names to ``(n1, n2, n3)`` arrays and ``vectors``
    maps names to ``(3, n1, n2, n3)`` arrays.
    """
    n1, n2, n3 = shape
    ncells = n1 * n2 * n3
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\n")
        fh.write("ASCII\n")
        fh.write("DATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {n1 + 1} {n2 + 1} {n3 + 1}\n")
        fh.write("ORIGIN 0 0 0\n")
        fh.write(f"SPACING {spacing:.9g} {spacing:.9g} {spacing:.9g}\n")
        fh.write(f"CELL_DATA {ncells}\n")
        for name, values in (scalars or {}).items():
            values = np.asarray(values, dtype=float)
            if values.shape != (n1, n2, n3):
                raise ValueError(f"scalar {name!r} has shape {values.shape}, expected {(n1, n2, n3)}")
            fh.write(f"SCALARS {name} double 1\n")
            fh.write("LOOKUP_TABLE default\n")
            _write_block(fh, values.ravel(order="F"))
        for name, values in (vectors or {}).items():
            values = np.asarray(values, dtype=float)
            if values.shape != (3, n1, n2, n3):
                raise ValueError(f"vector {name!r} has shape {values.shape}, expected {(3, n1, n2, n3)}")
            fh.write(f"VECTORS {name} double\n")
            _write_block(fh, np.stack([values[c].ravel(order="F") for c in range(3)], axis=1))
