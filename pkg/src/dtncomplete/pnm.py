"""Portable graymap / pixmap writers for conductivity and error images."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib import colormaps


def _scale(img, vmin, vmax):
    img = np.asarray(img, float)
    vmin = float(np.nanmin(img)) if vmin is None else vmin
    vmax = float(np.nanmax(img)) if vmax is None else vmax
    span = vmax - vmin if vmax > vmin else 1.0
    return np.clip(np.nan_to_num((img - vmin) / span), 0.0, 1.0)


def write_pgm(path, img, vmin=None, vmax=None) -> None:
    """8-bit binary PGM (P5), row 0 at the top."""
    data = np.round(_scale(img, vmin, vmax) * 255).astype(np.uint8)
    h, w = data.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + data.tobytes())


def write_ppm(path, img, cmap: str = "coolwarm", vmin=None, vmax=None) -> None:
    """8-bit binary PPM (P6) through a matplotlib colormap."""
    rgb = colormaps[cmap](_scale(img, vmin, vmax))[..., :3]
    data = np.round(rgb * 255).astype(np.uint8)
    h, w = data.shape[:2]
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode() + data.tobytes())


def read_pnm(path) -> np.ndarray:
    """Read back a P5/P6 file written by this module."""
    raw = Path(path).read_bytes()
    magic, dims, maxval, rest = raw.split(b"\n", 3)
    w, h = map(int, dims.split())
    ch = 1 if magic == b"P5" else 3
    arr = np.frombuffer(rest, dtype=np.uint8)
    return arr.reshape(h, w) if ch == 1 else arr.reshape(h, w, 3)
