"""Planar geometry for drone view areas.

A view area is the square patch of ground visible to the drone at one time
step: an axis pair centered on (center_x, center_y), rotated by `rotation`.
Success measurement, goal placement and trajectory bookkeeping all reduce to
polygon math on these squares, so everything here is exact double-precision
geometry with no external dependencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi

# Tolerance for exact-case area assertions and degeneracy cutoffs.
AREA_EPS = 1e-9


def normalize_angle(theta: float) -> float:
    """Wrap an angle into [0, 2*pi)."""
    theta = math.fmod(theta, TWO_PI)
    if theta < 0.0:
        theta += TWO_PI
    if theta >= TWO_PI:  # fmod can land exactly on 2*pi after the add
        theta = 0.0
    return theta


@dataclass(frozen=True)
class ViewArea:
    """A rotated square footprint on the ground plane.

    center_x/center_y and side are in meters, rotation in radians
    (normalized to [0, 2*pi) at construction).
    """

    center_x: float
    center_y: float
    side: float
    rotation: float = 0.0

    def __post_init__(self):
        if not (self.side > 0.0):
            raise ValueError(f"view side must be positive, got {self.side}")
        object.__setattr__(self, "rotation", normalize_angle(float(self.rotation)))
        object.__setattr__(self, "center_x", float(self.center_x))
        object.__setattr__(self, "center_y", float(self.center_y))
        object.__setattr__(self, "side", float(self.side))

    @property
    def center(self) -> tuple[float, float]:
        return (self.center_x, self.center_y)

    @property
    def area(self) -> float:
        return self.side * self.side


@dataclass(frozen=True)
class Polygon:
    """Convex polygon with vertices in counter-clockwise order."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 3:
            raise ValueError(f"polygon needs >= 3 vertices, got {len(verts)}")
        for i, v in enumerate(verts):
            if v == verts[(i + 1) % len(verts)]:
                raise ValueError(f"repeated consecutive vertex at index {i}")
        if not _is_convex_ccw(verts):
            raise ValueError("polygon must be convex with CCW winding")

    @property
    def area(self) -> float:
        return _shoelace(self.vertices)


@dataclass(frozen=True)
class Trajectory:
    """Ordered sequence of view areas; the first element is the start view."""

    views: tuple[ViewArea, ...]

    def __post_init__(self):
        views = tuple(self.views)
        object.__setattr__(self, "views", views)
        if len(views) == 0:
            raise ValueError("trajectory must contain at least one view")

    def __len__(self) -> int:
        return len(self.views)

    @property
    def start(self) -> ViewArea:
        return self.views[0]

    @property
    def final(self) -> ViewArea:
        return self.views[-1]


def _is_convex_ccw(verts: tuple[tuple[float, float], ...]) -> bool:
    # All cross products of consecutive edges must be >= 0 (collinear points
    # allowed), and the polygon must have positive area so the winding is CCW.
    n = len(verts)
    scale = max(1.0, max(abs(c) for v in verts for c in v))
    tol = -1e-12 * scale * scale
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        cx, cy = verts[(i + 2) % n]
        cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if cross < tol:
            return False
    return _shoelace(verts) > 0.0


def _shoelace(verts: tuple[tuple[float, float], ...]) -> float:
    acc = 0.0
    n = len(verts)
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return 0.5 * acc


def view_polygon(v: ViewArea) -> Polygon:
    """The four corners of a view area, counter-clockwise."""
    h = 0.5 * v.side
    c, s = math.cos(v.rotation), math.sin(v.rotation)
    corners = ((h, h), (-h, h), (-h, -h), (h, -h))
    verts = tuple(
        (v.center_x + c * dx - s * dy, v.center_y + s * dx + c * dy)
        for dx, dy in corners
    )
    return Polygon(verts)


def _clip_polygon(subject: tuple[tuple[float, float], ...],
                  clip: tuple[tuple[float, float], ...]) -> tuple:
    """Sutherland-Hodgman clip of a convex subject by a convex CCW clip window."""
    output = list(subject)
    cx1, cy1 = clip[-1]
    for cx2, cy2 in clip:
        if not output:
            break
        ex, ey = cx2 - cx1, cy2 - cy1  # clip edge direction; inside is the left side

        def side(p):
            return ex * (p[1] - cy1) - ey * (p[0] - cx1)

        def inside(p):
            return side(p) >= 0.0

        def intersect(p, q):
            # Intersection of segment p-q with the infinite clip edge line.
            dpx, dpy = q[0] - p[0], q[1] - p[1]
            denom = ex * dpy - ey * dpx
            if denom == 0.0:
                # Segment parallel to the clip line: a sign change across it
                # can only be rounding noise, so either endpoint is on the
                # line to within that noise.  Keep the closer one.
                return q if abs(side(q)) <= abs(side(p)) else p
            t = side(p) / -denom
            return (p[0] + t * dpx, p[1] + t * dpy)

        polygon, output = output, []
        prev = polygon[-1]
        prev_in = inside(prev)
        for cur in polygon:
            cur_in = inside(cur)
            if cur_in:
                if not prev_in:
                    output.append(intersect(prev, cur))
                output.append(cur)
            elif prev_in:
                output.append(intersect(prev, cur))
            prev, prev_in = cur, cur_in
        cx1, cy1 = cx2, cy2
    return tuple(output)


def intersection_area(a: Polygon, b: Polygon) -> float:
    """Area of the intersection of two convex polygons (0 if disjoint)."""
    for name, poly in (("a", a), ("b", b)):
        if not _is_convex_ccw(poly.vertices):
            raise ValueError(f"polygon {name} is not convex CCW")
    clipped = _clip_polygon(a.vertices, b.vertices)
    if len(clipped) < 3:
        return 0.0
    return max(0.0, _shoelace(clipped))


def iou(a: ViewArea, b: ViewArea) -> float:
    """Intersection-over-union of two view areas, in [0, 1]."""
    if a == b:
        return 1.0
    inter = intersection_area(view_polygon(a), view_polygon(b))
    union = a.area + b.area - inter
    value = inter / union
    # Clamp tiny numerical excursions outside [0, 1].
    return min(1.0, max(0.0, value))


def path_length(t: Trajectory) -> float:
    """Sum of Euclidean distances between consecutive view centers."""
    total = 0.0
    for prev, cur in zip(t.views, t.views[1:]):
        total += math.hypot(cur.center_x - prev.center_x,
                            cur.center_y - prev.center_y)
    return total
