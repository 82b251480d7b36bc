"""Traditional online augmentation baseline.

Gaussian blur and percentile intensity rescale are each gated with 50%
probability; every image then gets a random affine (rotation up to 10
degrees, shifts up to 20% of each dimension, zoom up to 50%, random
flips) applied as one inverse-mapped bilinear resampling.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .errors import DataError
from .imageio import quantize
from .warp import bilinear_sample


@dataclass(frozen=True)
class TradAugConfig:
    blur_prob: float = 0.5
    blur_sigma_range: tuple[float, float] = (0.5, 1.5)
    rescale_prob: float = 0.5
    rescale_percentiles: tuple[float, float] = (2.0, 98.0)
    max_rotation_deg: float = 10.0
    max_shift_frac: float = 0.2
    max_zoom_frac: float = 0.5
    hflip_prob: float = 0.5
    vflip_prob: float = 0.5

    def __post_init__(self):
        for name in ("blur_prob", "rescale_prob", "hflip_prob", "vflip_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise DataError(f"{name} must be in [0, 1], got {p}")
        lo, hi = self.rescale_percentiles
        if not 0.0 <= lo < hi <= 100.0:
            raise DataError(f"bad rescale percentiles ({lo}, {hi})")
        if self.blur_sigma_range[0] > self.blur_sigma_range[1]:
            raise DataError("blur_sigma_range must be (low, high)")
        for name in ("max_rotation_deg", "max_shift_frac", "max_zoom_frac"):
            if getattr(self, name) < 0:
                raise DataError(f"{name} must be >= 0")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TradAugConfig":
        obj = json.loads(text)
        for key in ("blur_sigma_range", "rescale_percentiles"):
            if key in obj:
                obj[key] = tuple(obj[key])
        return cls(**obj)


@dataclass
class AugRecord:
    """What one apply_traditional call actually did, for provenance."""

    blur_sigma: float | None = None
    rescaled: bool = False
    rotation_deg: float = 0.0
    shift_x_frac: float = 0.0
    shift_y_frac: float = 0.0
    zoom_frac: float = 0.0
    hflip: bool = False
    vflip: bool = False

    def applied_ops(self) -> list[str]:
        ops = []
        if self.blur_sigma is not None:
            ops.append("blur")
        if self.rescaled:
            ops.append("rescale")
        if self.rotation_deg != 0.0:
            ops.append("rotate")
        if self.shift_x_frac != 0.0 or self.shift_y_frac != 0.0:
            ops.append("shift")
        if self.zoom_frac != 0.0:
            ops.append("zoom")
        if self.hflip:
            ops.append("hflip")
        if self.vflip:
            ops.append("vflip")
        return ops


def percentile_rescale(
    img: np.ndarray, low_pct: float = 2.0, high_pct: float = 98.0
) -> np.ndarray:
    """Linearly map the [low_pct, high_pct] intensity window onto [0, 255].

    Constant (or otherwise degenerate) images are returned unchanged.
    """
    if not 0.0 <= low_pct < high_pct <= 100.0:
        raise DataError(f"bad percentile window ({low_pct}, {high_pct})")
    lo, hi = np.percentile(img, [low_pct, high_pct])
    if hi <= lo:
        return img.copy()
    return quantize((img.astype(np.float64) - lo) * (255.0 / (hi - lo)))


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D Gaussian samples truncated at 3*sigma, renormalized to sum 1."""
    if sigma <= 0:
        raise DataError(f"sigma must be > 0, got {sigma}")
    radius = max(1, int(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur_float(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian convolution with reflective borders, float output."""
    k = gaussian_kernel(sigma)
    data = img.astype(np.float64, copy=False)
    data = ndimage.correlate1d(data, k, axis=0, mode="reflect")
    data = ndimage.correlate1d(data, k, axis=1, mode="reflect")
    return data


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    return quantize(gaussian_blur_float(img, sigma))


def random_affine(
    img: np.ndarray,
    rotation_deg: float = 0.0,
    shift_x_frac: float = 0.0,
    shift_y_frac: float = 0.0,
    zoom_frac: float = 0.0,
    hflip: bool = False,
    vflip: bool = False,
) -> np.ndarray:
    """Flip, zoom about center, rotate about center, then shift.

    One inverse-mapped bilinear resampling; samples falling outside the
    source read 0 (ultrasound background is black).
    """
    if zoom_frac <= -1.0:
        raise DataError(f"zoom_frac must be > -1, got {zoom_frac}")
    if (
        rotation_deg == 0.0
        and shift_x_frac == 0.0
        and shift_y_frac == 0.0
        and zoom_frac == 0.0
        and not hflip
        and not vflip
    ):
        return img.copy()

    h, w = img.shape
    cx = (w - 1) / 2.0
    cy = (h - 1) / 2.0
    tx = shift_x_frac * w
    ty = shift_y_frac * h
    zoom = 1.0 + zoom_frac
    theta = math.radians(rotation_deg)
    c, s = math.cos(theta), math.sin(theta)

    ys, xs = np.mgrid[0:h, 0:w]
    # Undo shift, then rotation, then zoom, then flips.
    u = xs - cx - tx
    v = ys - cy - ty
    ur = c * u - s * v
    vr = s * u + c * v
    ur /= zoom
    vr /= zoom
    if hflip:
        ur = -ur
    if vflip:
        vr = -vr
    return quantize(bilinear_sample(img, ur + cx, vr + cy, cval=0.0))


def apply_traditional(
    img: np.ndarray, cfg: TradAugConfig, rng: np.random.Generator
) -> tuple[np.ndarray, AugRecord]:
    """Draw and apply one traditional augmentation; returns the image and
    a record of exactly what was applied."""
    rec = AugRecord()
    out = img

    if rng.random() < cfg.blur_prob:
        lo, hi = cfg.blur_sigma_range
        rec.blur_sigma = float(rng.uniform(lo, hi))
        out = gaussian_blur(out, rec.blur_sigma)
    if rng.random() < cfg.rescale_prob:
        rec.rescaled = True
        out = percentile_rescale(out, *cfg.rescale_percentiles)

    m = cfg.max_rotation_deg
    rec.rotation_deg = float(rng.uniform(-m, m)) if m > 0 else 0.0
    m = cfg.max_shift_frac
    rec.shift_x_frac = float(rng.uniform(-m, m)) if m > 0 else 0.0
    rec.shift_y_frac = float(rng.uniform(-m, m)) if m > 0 else 0.0
    m = cfg.max_zoom_frac
    rec.zoom_frac = float(rng.uniform(-m, m)) if m > 0 else 0.0
    rec.hflip = bool(rng.random() < cfg.hflip_prob)
    rec.vflip = bool(rng.random() < cfg.vflip_prob)

    out = random_affine(
        out,
        rotation_deg=rec.rotation_deg,
        shift_x_frac=rec.shift_x_frac,
        shift_y_frac=rec.shift_y_frac,
        zoom_frac=rec.zoom_frac,
        hflip=rec.hflip,
        vflip=rec.vflip,
    )
    return out, rec
