"""Independent numerical oracles used by the test suite.

These deliberately avoid the library's own polygon-clipping code paths so that
agreement between the two is meaningful.  The Monte-Carlo IoU estimator uses
analytic square areas and samples only the candidate intersection region
(the overlap of the two axis-aligned bounding boxes), which keeps the variance
low enough for tight tolerances at modest sample counts.
"""

from __future__ import annotations

import math

import numpy as np

from aeronav.geometry import ViewArea


def _bbox(v: ViewArea) -> tuple[float, float, float, float]:
    """Axis-aligned bounding box (xmin, xmax, ymin, ymax) of a rotated square."""
    h = v.side / 2.0
    c, s = math.cos(v.rotation), math.sin(v.rotation)
    ex = h * (abs(c) + abs(s))  # max |x| extent of the rotated corners
    cx, cy = v.center
    return cx - ex, cx + ex, cy - ex, cy + ex


def _inside(v: ViewArea, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized membership test by rotating points into the square's frame."""
    cx, cy = v.center
    c, s = math.cos(-v.rotation), math.sin(-v.rotation)
    dx, dy = xs - cx, ys - cy
    lx = c * dx - s * dy
    ly = s * dx + c * dy
    h = v.side / 2.0
    return (np.abs(lx) <= h) & (np.abs(ly) <= h)


def mc_intersection_area(a: ViewArea, b: ViewArea, n: int = 2_000_000,
                         seed: int = 0) -> float:
    """Monte-Carlo estimate of the overlap area of two rotated squares."""
    ax0, ax1, ay0, ay1 = _bbox(a)
    bx0, bx1, by0, by1 = _bbox(b)
    x0, x1 = max(ax0, bx0), min(ax1, bx1)
    y0, y1 = max(ay0, by0), min(ay1, by1)
    if x0 >= x1 or y0 >= y1:
        return 0.0
    rng = np.random.default_rng(seed)
    xs = rng.uniform(x0, x1, n)
    ys = rng.uniform(y0, y1, n)
    hits = _inside(a, xs, ys) & _inside(b, xs, ys)
    return (x1 - x0) * (y1 - y0) * float(np.count_nonzero(hits)) / n


def mc_iou(a: ViewArea, b: ViewArea, n: int = 2_000_000, seed: int = 0) -> float:
    """Monte-Carlo IoU with analytic per-square areas (variance-reduced)."""
    inter = mc_intersection_area(a, b, n=n, seed=seed)
    union = a.side ** 2 + b.side ** 2 - inter
    return inter / union


def convex_hull(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Andrew's monotone chain; returns the hull CCW without the closing point.

    Degenerate inputs (all collinear, or a single point) return whatever
    extreme points remain, which is still correct for half-plane tests.
    """
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def build(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                (ox, oy), (ax, ay) = out[-2], out[-1]
                if (ax - ox) * (p[1] - oy) - (ay - oy) * (p[0] - ox) > 0:
                    break
                out.pop()
            out.append(p)
        return out

    lower = build(pts)
    upper = build(reversed(pts))
    return lower[:-1] + upper[:-1]


def point_in_hull(q: tuple[float, float], points: list[tuple[float, float]],
                  tol: float = 1e-9) -> bool:
    """Whether q lies in the convex hull of `points` (within tol)."""
    hull = convex_hull(points)
    if len(hull) == 1:
        return math.hypot(q[0] - hull[0][0], q[1] - hull[0][1]) <= tol
    if len(hull) == 2:
        (ax, ay), (bx, by) = hull
        abx, aby = bx - ax, by - ay
        cross = abx * (q[1] - ay) - aby * (q[0] - ax)
        if abs(cross) > tol * max(1.0, math.hypot(abx, aby)):
            return False
        dot = (q[0] - ax) * abx + (q[1] - ay) * aby
        return -tol <= dot <= abx * abx + aby * aby + tol
    for i in range(len(hull)):
        ax, ay = hull[i]
        bx, by = hull[(i + 1) % len(hull)]
        if (bx - ax) * (q[1] - ay) - (by - ay) * (q[0] - ax) < -tol:
            return False
    return True
