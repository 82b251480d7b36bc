"""Inverse-mapped bilinear resampling primitives.

All geometric transforms in this package are implemented as a single
inverse map followed by one bilinear gather, so content is resampled
exactly once per operation (no double blurring).
"""

from __future__ import annotations

import numpy as np

from .imageio import quantize


def bilinear_sample(
    img: np.ndarray,
    xs: np.ndarray,
    ys: np.ndarray,
    cval: float = 0.0,
    clamp: bool = False,
) -> np.ndarray:
    """Sample `img` at float coordinates (xs, ys), x = column, y = row.

    With clamp=False, samples outside the image read `cval`; with
    clamp=True coordinates are clamped to the border (used for resize).
    Returns float64 values of the same shape as xs.
    """
    h, w = img.shape
    data = img.astype(np.float64, copy=False)
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)

    if clamp:
        xs = np.clip(xs, 0.0, w - 1.0)
        ys = np.clip(ys, 0.0, h - 1.0)
        inside = None
    else:
        inside = (xs >= 0.0) & (xs <= w - 1.0) & (ys >= 0.0) & (ys <= h - 1.0)
        xs = np.clip(xs, 0.0, w - 1.0)
        ys = np.clip(ys, 0.0, h - 1.0)

    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0

    top = data[y0, x0] * (1.0 - fx) + data[y0, x1] * fx
    bot = data[y1, x0] * (1.0 - fx) + data[y1, x1] * fx
    out = top * (1.0 - fy) + bot * fy

    if inside is not None:
        out = np.where(inside, out, cval)
    return out


def resize_bilinear(img: np.ndarray, height: int, width: int) -> np.ndarray:
    """Resize to (height, width) using the pixel-area coordinate convention."""
    h, w = img.shape
    if (h, w) == (height, width):
        return img.copy()
    ys = (np.arange(height, dtype=np.float64) + 0.5) * (h / height) - 0.5
    xs = (np.arange(width, dtype=np.float64) + 0.5) * (w / width) - 0.5
    grid_x, grid_y = np.meshgrid(xs, ys)
    return quantize(bilinear_sample(img, grid_x, grid_y, clamp=True))
