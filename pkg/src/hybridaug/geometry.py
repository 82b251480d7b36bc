"""Binary-mask cleanup and shape measurement.

Cleanup uses the standard complementary connectivity pairing: 4-connected
background for hole filling, 8-connected foreground for components.
Shape statistics are taken over the filled convex hull of the mask:
the hull polygon is built from foreground pixel centers, rasterized back
to a pixel set, and second-order central moments of that set give the
axis lengths and eccentricity. The best-fit circle is the equal-area
circle centered on the hull centroid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateMaskError, EmptyMaskError

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class CircleFit:
    cx: float
    cy: float
    r: float


@dataclass(frozen=True)
class HullPolygon:
    """Convex polygon over pixel centers, counterclockwise vertex order."""

    vertices: np.ndarray  # (n, 2) float64, columns (x, y)

    def area(self) -> float:
        """Shoelace area of the polygon."""
        v = self.vertices
        x, y = v[:, 0], v[:, 1]
        return 0.5 * abs(
            float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
        )


@dataclass(frozen=True)
class ShapeStats:
    centroid: tuple[float, float]
    major_axis: float
    minor_axis: float
    orientation: float
    eccentricity: float

    @property
    def axis_ratio(self) -> float:
        return self.major_axis / self.minor_axis


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Set every background pixel not 4-connected to the border to foreground."""
    return ndimage.binary_fill_holes(mask)


def largest_component(mask: np.ndarray) -> np.ndarray:
    """Keep only the largest 8-connected component.

    Area ties are broken in favor of the component containing the smallest
    row-major pixel index (labels are assigned in raster order, so among
    equal areas the smallest label wins).
    """
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if n == 0:
        raise EmptyMaskError("mask has no foreground pixel")
    if n == 1:
        return mask.astype(bool).copy()
    counts = np.bincount(labels.ravel())
    counts[0] = 0
    keep = int(np.argmax(counts))
    return labels == keep


def convex_hull(mask: np.ndarray) -> HullPolygon:
    """Convex hull of foreground pixel centers (monotone chain)."""
    points = _boundary_points(mask)
    if points.shape[0] < 3:
        raise DegenerateMaskError("fewer than 3 foreground pixels")
    hull = _monotone_chain(points)
    if hull.shape[0] < 3:
        raise DegenerateMaskError("foreground pixels are collinear")
    return HullPolygon(vertices=hull)


def _boundary_points(mask: np.ndarray) -> np.ndarray:
    """Foreground pixels that touch background; enough to define the hull."""
    mask = mask.astype(bool, copy=False)
    if not mask.any():
        raise EmptyMaskError("mask has no foreground pixel")
    interior = ndimage.binary_erosion(mask, structure=_EIGHT, border_value=0)
    ys, xs = np.nonzero(mask & ~interior)
    return np.column_stack([xs, ys]).astype(np.float64)


def _monotone_chain(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; returns CCW vertices without duplicates."""
    pts = np.unique(points, axis=0)
    if pts.shape[0] < 3:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = np.array(lower[:-1] + upper[:-1], dtype=np.float64)
    return hull


def filled_hull(mask: np.ndarray) -> np.ndarray:
    """Pixels whose centers lie inside or on the convex hull of the mask."""
    hull = convex_hull(mask)
    return rasterize_polygon(hull, mask.shape[1], mask.shape[0])


def rasterize_polygon(poly: HullPolygon, width: int, height: int) -> np.ndarray:
    """Rasterize a convex polygon: pixel centers inside or on the boundary."""
    v = poly.vertices
    x0 = max(0, int(math.floor(v[:, 0].min())))
    x1 = min(width - 1, int(math.ceil(v[:, 0].max())))
    y0 = max(0, int(math.floor(v[:, 1].min())))
    y1 = min(height - 1, int(math.ceil(v[:, 1].max())))
    out = np.zeros((height, width), dtype=bool)
    if x1 < x0 or y1 < y0:
        return out

    xs = np.arange(x0, x1 + 1, dtype=np.float64)
    ys = np.arange(y0, y1 + 1, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys)

    # CCW vertices: a point is inside iff it is on the left of (or on)
    # every directed edge. eps absorbs float round-off on the boundary.
    eps = 1e-9
    inside = np.ones(gx.shape, dtype=bool)
    n = v.shape[0]
    for i in range(n):
        ax, ay = v[i]
        bx, by = v[(i + 1) % n]
        cross = (bx - ax) * (gy - ay) - (by - ay) * (gx - ax)
        inside &= cross >= -eps
    out[y0 : y1 + 1, x0 : x1 + 1] = inside
    return out


def _central_moments(region: np.ndarray) -> tuple[float, float, float, float, float, float]:
    """(area, cx, cy, mu20, mu02, mu11) treating pixels as unit point masses."""
    ys, xs = np.nonzero(region)
    area = float(xs.size)
    cx = float(xs.mean())
    cy = float(ys.mean())
    dx = xs - cx
    dy = ys - cy
    mu20 = float(np.dot(dx, dx)) / area
    mu02 = float(np.dot(dy, dy)) / area
    mu11 = float(np.dot(dx, dy)) / area
    return area, cx, cy, mu20, mu02, mu11


def region_stats(region: np.ndarray) -> ShapeStats:
    """Moment statistics of an already-filled convex region."""
    _, cx, cy, mu20, mu02, mu11 = _central_moments(region)

    # Eigenvalues of the 2x2 covariance matrix, closed form.
    tr = mu20 + mu02
    det = mu20 * mu02 - mu11 * mu11
    disc = max(0.0, tr * tr / 4.0 - det)
    lam1 = tr / 2.0 + math.sqrt(disc)
    lam2 = tr / 2.0 - math.sqrt(disc)
    if lam2 <= 0.0:
        raise DegenerateMaskError("mask has no 2-D extent")

    major = 4.0 * math.sqrt(lam1)
    minor = 4.0 * math.sqrt(lam2)
    orientation = 0.5 * math.atan2(2.0 * mu11, mu20 - mu02)
    ecc = math.sqrt(max(0.0, 1.0 - lam2 / lam1))
    return ShapeStats(
        centroid=(cx, cy),
        major_axis=major,
        minor_axis=minor,
        orientation=orientation,
        eccentricity=ecc,
    )


def region_circle(region: np.ndarray) -> CircleFit:
    """Equal-area circle centered on the centroid of a filled region."""
    area, cx, cy, *_ = _central_moments(region)
    return CircleFit(cx=cx, cy=cy, r=math.sqrt(area / math.pi))


def _check_area(mask: np.ndarray, min_area: int) -> np.ndarray:
    mask = mask.astype(bool, copy=False)
    if int(mask.sum()) < min_area:
        raise DegenerateMaskError(
            f"mask area {int(mask.sum())} below minimum {min_area}"
        )
    return mask


def shape_stats(mask: np.ndarray, min_area: int = 64) -> ShapeStats:
    """Moment-based axes/eccentricity of the filled convex hull.

    Eccentricity is sqrt(1 - (minor/major)^2), in [0, 1). Raises
    DegenerateMaskError for masks below min_area or with no 2-D extent.
    """
    return region_stats(filled_hull(_check_area(mask, min_area)))


def fit_circle(mask: np.ndarray, min_area: int = 64) -> CircleFit:
    """Equal-area circle centered on the centroid of the filled hull."""
    return region_circle(filled_hull(_check_area(mask, min_area)))


def rasterize_circle(circle: CircleFit, width: int, height: int) -> np.ndarray:
    """Pixel centers with (x-cx)^2 + (y-cy)^2 <= r^2, clipped to bounds."""
    if circle.r <= 0:
        raise DegenerateMaskError(f"non-positive radius {circle.r}")
    out = np.zeros((height, width), dtype=bool)
    x0 = max(0, int(math.floor(circle.cx - circle.r)))
    x1 = min(width - 1, int(math.ceil(circle.cx + circle.r)))
    y0 = max(0, int(math.floor(circle.cy - circle.r)))
    y1 = min(height - 1, int(math.ceil(circle.cy + circle.r)))
    if x1 < x0 or y1 < y0:
        return out
    xs = np.arange(x0, x1 + 1, dtype=np.float64) - circle.cx
    ys = np.arange(y0, y1 + 1, dtype=np.float64) - circle.cy
    gx, gy = np.meshgrid(xs, ys)
    out[y0 : y1 + 1, x0 : x1 + 1] = gx * gx + gy * gy <= circle.r * circle.r
    return out


def circle_in_bounds(circle: CircleFit, width: int, height: int) -> bool:
    """True when every sampled pixel center of the circle is inside the image."""
    return (
        circle.cx - circle.r >= 0.0
        and circle.cy - circle.r >= 0.0
        and circle.cx + circle.r <= width - 1.0
        and circle.cy + circle.r <= height - 1.0
    )
