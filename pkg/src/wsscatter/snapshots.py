"""Binary field snapshots (``WSFLD1``).

Layout: the 6 magic bytes, little-endian u32 ``n_points``, little-endian f64
``box_length``, then ``n**3`` interleaved (re, im) f64 pairs with x varying
fastest.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .spectral import Field, SpectralGrid

MAGIC = b"WSFLD1"
_HEADER = struct.Struct("<6sId")


def encode(f: Field) -> bytes:
    vals = f.physical().values
    flat = np.ravel(vals, order="F")  # x fastest
    body = np.empty(2 * flat.size, dtype="<f8")
    body[0::2] = flat.real
    body[1::2] = flat.imag
    return _HEADER.pack(MAGIC, f.grid.n_points, f.grid.box_length) + body.tobytes()


def decode(data: bytes) -> Field:
    if len(data) < _HEADER.size:
        raise ValueError("snapshot truncated before end of header")
    magic, n, L = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"bad snapshot magic {magic!r}")
    grid = SpectralGrid(n, L)
    expected = _HEADER.size + 16 * n ** 3
    if len(data) != expected:
        raise ValueError(f"snapshot has {len(data)} bytes, expected {expected} for n={n}")
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    vals = (body[0::2] + 1j * body[1::2]).reshape(grid.shape, order="F")
    return Field(grid, vals)


def write_snapshot(path, f: Field) -> None:
    Path(path).write_bytes(encode(f))


def read_snapshot(path) -> Field:
    return decode(Path(path).read_bytes())
