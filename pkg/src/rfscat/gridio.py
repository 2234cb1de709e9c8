"""Raster export: binary PGM (P5) and raw float64 field grids.

The raw grid format is a 64-byte header followed by height*width float64
values, row-major, little-endian:

    offset  size  content
    0       8     magic b"RFSGRID1"
    8       8     dtype tag b"<f8" padded with NULs
    16      4     uint32 height
    20      4     uint32 width
    24      8     float64 physical extent (side of the covered square, m)
    32      32    reserved, zero
"""

import struct
from pathlib import Path

import numpy as np

from .geometry import ImageRaster

GRID_MAGIC = b"RFSGRID1"
_HEADER_SIZE = 64


def pgm_bytes(values: np.ndarray) -> bytes:
    """Encode a 2D array as binary PGM (maxval 255).

    uint8 arrays with values in {0, 1} are scaled to {0, 255}; float arrays
    are max-normalized. Other uint8 content is written as-is.
    """
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ValueError("PGM input must be 2D")
    if arr.dtype == np.uint8:
        data = arr * 255 if arr.max(initial=0) <= 1 else arr
    else:
        finite = np.asarray(arr, dtype=np.float64)
        peak = finite.max() if finite.size else 0.0
        data = (
            np.zeros_like(finite, dtype=np.uint8)
            if peak <= 0
            else np.clip(finite / peak * 255.0, 0, 255).astype(np.uint8)
        )
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    return header + data.astype(np.uint8).tobytes()


def write_pgm(path, values: np.ndarray) -> None:
    Path(path).write_bytes(pgm_bytes(values))


def write_field_grid(path, raster: ImageRaster) -> None:
    """Write an ImageRaster as a raw float64 grid with the documented header."""
    header = GRID_MAGIC
    header += b"<f8".ljust(8, b"\x00")
    header += struct.pack("<II", raster.height, raster.width)
    header += struct.pack("<d", float(raster.extent))
    header = header.ljust(_HEADER_SIZE, b"\x00")
    body = np.ascontiguousarray(raster.values, dtype="<f8").tobytes()
    Path(path).write_bytes(header + body)


def read_field_grid(path) -> ImageRaster:
    """Read a raw float64 grid written by write_field_grid."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER_SIZE or blob[:8] != GRID_MAGIC:
        raise ValueError(f"{path}: not a field grid file")
    height, width = struct.unpack("<II", blob[16:24])
    extent = struct.unpack("<d", blob[24:32])[0]
    expected = _HEADER_SIZE + 8 * height * width
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(blob)}")
    values = np.frombuffer(blob[_HEADER_SIZE:], dtype="<f8").reshape(height, width)
    return ImageRaster(values=values.copy(), extent=extent)
