"""8-bit grayscale PNG I/O and mask conventions.

Images are numpy arrays of shape (height, width), dtype uint8. Binary
masks are boolean arrays of the same shape; on disk they are grayscale
PNGs where any value >= 128 reads as foreground.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

from .errors import DataError

MASK_THRESHOLD = 128


def load_gray(path: str | os.PathLike) -> np.ndarray:
    """Decode an 8-bit grayscale PNG. Color or non-8-bit inputs are rejected."""
    with Image.open(path) as im:
        if im.mode != "L":
            raise DataError(
                f"{path}: expected 8-bit grayscale (mode L), got mode {im.mode}"
            )
        arr = np.asarray(im, dtype=np.uint8)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DataError(f"{path}: empty or non-2D image")
    return arr


def save_gray(path: str | os.PathLike, img: np.ndarray) -> None:
    img = np.asarray(img)
    if img.dtype != np.uint8 or img.ndim != 2:
        raise DataError("save_gray expects a 2-D uint8 array")
    Image.fromarray(img, mode="L").save(path, format="PNG")


def load_mask(path: str | os.PathLike) -> np.ndarray:
    return load_gray(path) >= MASK_THRESHOLD


def save_mask(path: str | os.PathLike, mask: np.ndarray) -> None:
    mask = np.asarray(mask)
    if mask.dtype != bool or mask.ndim != 2:
        raise DataError("save_mask expects a 2-D boolean array")
    save_gray(path, np.where(mask, 255, 0).astype(np.uint8))


def quantize(img: np.ndarray) -> np.ndarray:
    """Round a float image to uint8, clipping to [0, 255]."""
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)
