"""Binary field snapshots (``.dspn``).

Layout, all little-endian: the 4 magic bytes ``DSPN``, then ``u32`` version,
``u32`` n, ``u32`` component count, ``f64`` half-width L, then each component
in turn as ``n^3`` complex values (``f64`` real, ``f64`` imaginary) with the
x index varying fastest.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .spectral import GridSpec

__all__ = ["MAGIC", "VERSION", "write_snapshot", "read_snapshot"]

MAGIC = b"DSPN"
VERSION = 1
_HEADER = struct.Struct("<4sIIId")


def write_snapshot(path: str | Path, u: np.ndarray, grid: GridSpec) -> None:
    u = np.asarray(u)
    if u.ndim != 4 or u.shape[1:] != grid.shape:
        raise ValueError(f"field shape {u.shape} does not match grid {grid.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, grid.n, u.shape[0], grid.half_width))
        for comp in u:
            fh.write(np.ascontiguousarray(comp.ravel(order="F"), dtype="<c16").tobytes())


def read_snapshot(path: str | Path) -> tuple[np.ndarray, GridSpec]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, n, ncomp, L = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + ncomp * n**3 * 16
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size).astype(complex)
    u = np.stack([c.reshape((n, n, n), order="F") for c in data.reshape(ncomp, n**3)])
    return u, GridSpec(n, L)
