"""Rotated-square view geometry: polygons, clipping, IoU, path length."""

import math

import pytest

from aeronav.geometry import (
    Polygon,
    Trajectory,
    ViewArea,
    intersection_area,
    iou,
    normalize_angle,
    path_length,
    view_polygon,
)

from _oracles import mc_iou

SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------- view areas

def test_view_area_validation():
    with pytest.raises(ValueError):
        ViewArea(0.0, 0.0, side=0.0)
    with pytest.raises(ValueError):
        ViewArea(0.0, 0.0, side=-2.0)


def test_rotation_normalized_to_canonical_range():
    v = ViewArea(0.0, 0.0, side=2.0, rotation=-math.pi / 2)
    assert 0.0 <= v.rotation < 2 * math.pi
    assert v.rotation == pytest.approx(3 * math.pi / 2)
    w = ViewArea(0.0, 0.0, side=2.0, rotation=5 * math.pi)
    assert w.rotation == pytest.approx(math.pi)
    assert normalize_angle(2 * math.pi) == 0.0


def test_axis_aligned_unit_square_corners():
    poly = view_polygon(ViewArea(0.0, 0.0, side=1.0, rotation=0.0))
    assert poly.vertices == (
        (0.5, 0.5), (-0.5, 0.5), (-0.5, -0.5), (0.5, -0.5),
    )
    assert poly.area == pytest.approx(1.0)


def test_quarter_turn_permutes_the_corner_set():
    base = view_polygon(ViewArea(0.0, 0.0, side=1.0, rotation=0.0))
    turned = view_polygon(ViewArea(0.0, 0.0, side=1.0, rotation=math.pi / 2))
    rounded = {(round(x, 12), round(y, 12)) for x, y in turned.vertices}
    assert rounded == {(round(x, 12), round(y, 12)) for x, y in base.vertices}


def test_eighth_turn_corners_land_on_diagonals():
    v = ViewArea(2.0, 3.0, side=2.0, rotation=math.pi / 4)
    got = sorted(view_polygon(v).vertices)
    want = sorted([(2.0, 3.0 + SQRT2), (2.0 - SQRT2, 3.0),
                   (2.0, 3.0 - SQRT2), (2.0 + SQRT2, 3.0)])
    for (gx, gy), (wx, wy) in zip(got, want):
        assert gx == pytest.approx(wx, abs=1e-12)
        assert gy == pytest.approx(wy, abs=1e-12)


# ------------------------------------------------------------------ polygons

def test_polygon_rejects_degenerate_inputs():
    with pytest.raises(ValueError):
        Polygon(((0, 0), (1, 0)))                       # too few vertices
    with pytest.raises(ValueError):
        Polygon(((0, 0), (1, 0), (1, 0), (0, 1)))        # repeated vertex
    with pytest.raises(ValueError):
        Polygon(((0, 0), (0, 1), (1, 1), (1, 0)))        # clockwise winding
    with pytest.raises(ValueError):
        Polygon(((0, 0), (2, 0), (2, 2), (1, 0.5), (0, 2)))  # reflex vertex


def test_polygon_accepts_convex_ccw():
    p = Polygon(((0, 0), (1, 0), (1, 1), (0, 1)))
    assert p.area == pytest.approx(1.0)


# ------------------------------------------------------- intersection + IoU

def test_identical_views_have_iou_exactly_one():
    for rot in (0.0, 0.3, math.pi / 4, 5.1):
        v = ViewArea(12.3, -4.5, side=7.0, rotation=rot)
        assert iou(v, v) == 1.0


def test_disjoint_views_have_iou_zero():
    a = ViewArea(0.0, 0.0, side=2.0)
    b = ViewArea(10.0, 0.0, side=2.0)
    assert iou(a, b) == 0.0
    assert intersection_area(view_polygon(a), view_polygon(b)) == 0.0


def test_half_shift_gives_iou_one_third():
    a = ViewArea(0.0, 0.0, side=2.0)
    b = ViewArea(1.0, 0.0, side=2.0)   # overlap 1x2 = 2; union 4+4-2 = 6
    assert iou(a, b) == pytest.approx(1.0 / 3.0, abs=1e-9)


def test_concentric_eighth_turn_iou():
    # Overlap of a square and its 45-degree twin is a regular octagon
    # with area 2*(sqrt(2)-1)*s^2; here s=2.
    a = ViewArea(0.0, 0.0, side=2.0, rotation=0.0)
    b = ViewArea(0.0, 0.0, side=2.0, rotation=math.pi / 4)
    inter = intersection_area(view_polygon(a), view_polygon(b))
    expect_inter = 2 * (SQRT2 - 1) * 4.0
    assert inter == pytest.approx(expect_inter, abs=1e-9)
    expect_iou = expect_inter / (8.0 - expect_inter)
    assert iou(a, b) == pytest.approx(expect_iou, abs=1e-9)
    # which simplifies to sqrt(2)/2:
    assert iou(a, b) == pytest.approx(SQRT2 / 2.0, abs=1e-9)


def test_clip_area_never_exceeds_either_input():
    a = ViewArea(0.0, 0.0, side=3.0, rotation=0.7)
    b = ViewArea(1.0, -0.5, side=2.0, rotation=2.1)
    inter = intersection_area(view_polygon(a), view_polygon(b))
    assert 0.0 <= inter <= min(a.area, b.area) + 1e-12


def test_iou_symmetry_and_bounds():
    cases = [
        (ViewArea(0, 0, 2.0, 0.0), ViewArea(0.5, 0.3, 2.0, 0.4)),
        (ViewArea(-1, 2, 3.0, 1.2), ViewArea(0.2, 2.5, 1.5, 4.0)),
        (ViewArea(0, 0, 1.0, 0.0), ViewArea(5, 5, 1.0, 0.0)),
        (ViewArea(0, 0, 4.0, 5.9), ViewArea(0.1, 0.1, 4.0, 2.0)),
    ]
    for a, b in cases:
        ab, ba = iou(a, b), iou(b, a)
        assert ab == pytest.approx(ba, abs=1e-12)
        assert 0.0 <= ab <= 1.0


def test_iou_invariant_under_rigid_motion():
    a = ViewArea(0.0, 0.0, side=2.0, rotation=0.3)
    b = ViewArea(0.7, -0.4, side=1.5, rotation=1.1)
    base = iou(a, b)
    for tx, ty, phi in [(3.0, -2.0, 0.0), (0.0, 0.0, 1.234), (-5.5, 8.0, 2.9)]:
        c, s = math.cos(phi), math.sin(phi)

        def move(v: ViewArea) -> ViewArea:
            x = c * v.center_x - s * v.center_y + tx
            y = s * v.center_x + c * v.center_y + ty
            return ViewArea(x, y, v.side, v.rotation + phi)

        assert iou(move(a), move(b)) == pytest.approx(base, abs=1e-9)


def test_intersection_area_rejects_nonconvex_input():
    bad = Polygon.__new__(Polygon)          # bypass constructor validation
    object.__setattr__(bad, "vertices", ((0, 0), (2, 0), (2, 2), (1, 0.5), (0, 2)))
    good = view_polygon(ViewArea(0, 0, 2.0))
    with pytest.raises(ValueError):
        intersection_area(bad, good)
    with pytest.raises(ValueError):
        intersection_area(good, bad)


def test_iou_matches_monte_carlo_oracle():
    cases = [
        (ViewArea(0.0, 0.0, 2.0, 0.0), ViewArea(0.8, 0.4, 2.0, 0.6)),
        (ViewArea(1.0, 1.0, 3.0, 0.9), ViewArea(2.0, 0.0, 2.0, 2.4)),
        (ViewArea(0.0, 0.0, 2.0, 0.0), ViewArea(1.9, 1.9, 2.0, 0.78)),
        (ViewArea(-3.0, 2.0, 5.0, 3.3), ViewArea(-2.0, 3.0, 2.5, 5.7)),
    ]
    for k, (a, b) in enumerate(cases):
        est = mc_iou(a, b, n=2_000_000, seed=k)
        assert iou(a, b) == pytest.approx(est, abs=2e-3)


# -------------------------------------------------------------- trajectories

def test_trajectory_requires_views():
    with pytest.raises(ValueError):
        Trajectory(())


def test_path_length_axis_moves():
    t = Trajectory((
        ViewArea(0.0, 0.0, 1.0),
        ViewArea(3.0, 0.0, 1.0),
        ViewArea(3.0, 4.0, 1.0),
    ))
    assert path_length(t) == pytest.approx(7.0, abs=1e-12)
    assert len(t) == 3
    assert t.start.center == (0.0, 0.0)
    assert t.final.center == (3.0, 4.0)


def test_path_length_diagonal_and_single_view():
    t = Trajectory((ViewArea(0, 0, 1.0), ViewArea(2.0, 2.0, 1.0)))
    assert path_length(t) == pytest.approx(2 * SQRT2, abs=1e-12)
    assert path_length(Trajectory((ViewArea(5, 5, 2.0),))) == 0.0


def test_rotation_does_not_change_path_length():
    t1 = Trajectory((ViewArea(0, 0, 1.0, 0.0), ViewArea(1, 1, 1.0, 0.0)))
    t2 = Trajectory((ViewArea(0, 0, 1.0, 2.0), ViewArea(1, 1, 1.0, 4.0)))
    assert path_length(t1) == path_length(t2)
