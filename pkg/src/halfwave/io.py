"""HWF1 field files: a 16-byte magic+version header, then little-endian
dim (u32), n (u32), L (f64), followed by n^dim f64 samples in row-major
order.  A sidecar JSON descriptor with the same metadata sits next to
every binary."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .grid import Field, make_grid

MAGIC = b"HWF1FLD\x00"
VERSION = 1
_HEADER = struct.Struct("<8sQ")
_META = struct.Struct("<IId")


def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".json")


def write_field(path: str | Path, field: Field) -> Path:
    """Write a field in HWF1 format and its JSON sidecar; returns the path."""
    path = Path(path)
    g = field.grid
    payload = np.ascontiguousarray(field.values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION))
        fh.write(_META.pack(g.dim, g.points_per_dim, g.box_length))
        fh.write(payload.tobytes(order="C"))
    meta = {
        "format": "HWF1",
        "version": VERSION,
        "dim": g.dim,
        "points_per_dim": g.points_per_dim,
        "box_length": g.box_length,
        "samples": g.points_per_dim**g.dim,
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def read_field(path: str | Path) -> Field:
    """Read an HWF1 field, validating magic, version and payload size."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size + _META.size:
        raise ValueError(f"{path}: truncated HWF1 file")
    magic, version = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, not an HWF1 file")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported HWF1 version {version}")
    dim, n, box_length = _META.unpack_from(raw, _HEADER.size)
    count = n**dim
    offset = _HEADER.size + _META.size
    expected = offset + 8 * count
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    values = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
    grid = make_grid(int(dim), float(box_length), int(n))
    return Field(grid, values.reshape((n,) * dim).copy())
