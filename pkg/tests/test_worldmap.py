"""Procedural terrain field and view rasterization."""

import math

import numpy as np
import pytest

from aeronav.geometry import ViewArea
from aeronav.worldmap import WorldMap


def test_sample_is_pure_function_of_seed_and_point():
    m1 = WorldMap(map_seed=42)
    m2 = WorldMap(map_seed=42)
    xs = np.linspace(3.0, 97.0, 50)
    ys = np.linspace(5.0, 95.0, 50)
    assert np.array_equal(m1.sample(xs, ys), m2.sample(xs, ys))
    assert m1.sample(12.34, 56.78) == m2.sample(12.34, 56.78)


def test_values_stay_in_unit_interval():
    m = WorldMap(map_seed=7)
    rng = np.random.default_rng(0)
    xs = rng.uniform(-50.0, 150.0, 5000)   # even off-world points are defined
    ys = rng.uniform(-50.0, 150.0, 5000)
    vals = m.sample(xs, ys)
    assert vals.min() >= 0.0 and vals.max() <= 1.0


def test_different_seeds_give_different_terrain():
    a = WorldMap(map_seed=1)
    b = WorldMap(map_seed=2)
    xs = np.linspace(10, 90, 40)
    assert not np.allclose(a.sample(xs, xs), b.sample(xs, xs))


def test_field_is_continuous():
    m = WorldMap(map_seed=99)
    base = m.sample(33.3, 44.4)
    for eps in (1e-6, 1e-7):
        assert abs(m.sample(33.3 + eps, 44.4) - base) < 1e-4


def test_rasterize_shape_and_determinism():
    m = WorldMap(map_seed=5)
    v = ViewArea(50.0, 50.0, 10.0, 0.7)
    img1 = m.rasterize(v, 16)
    img2 = m.rasterize(v, 16)
    assert img1.shape == (16, 16)
    assert np.array_equal(img1, img2)
    assert img1.min() >= 0.0 and img1.max() <= 1.0


def test_disjoint_views_see_different_pixels():
    m = WorldMap(map_seed=5)
    a = m.rasterize(ViewArea(20.0, 20.0, 10.0), 16)
    b = m.rasterize(ViewArea(80.0, 80.0, 10.0), 16)
    assert not np.array_equal(a, b)


def test_facing_north_gives_axis_aligned_image():
    # rotation pi/2 faces +y: row 0 must be the north edge, columns west→east
    m = WorldMap(map_seed=3)
    r = 8
    v = ViewArea(50.0, 50.0, 8.0, math.pi / 2.0)
    img = m.rasterize(v, r)
    offs = (np.arange(r) + 0.5) / r - 0.5
    xs = 50.0 + offs[np.newaxis, :] * v.side
    ys = 50.0 - offs[:, np.newaxis] * v.side   # row 0 at the top (+y)
    assert np.allclose(img, m.sample(xs, ys), atol=1e-12)


def test_half_turn_equals_rotated_image():
    m = WorldMap(map_seed=11)
    v = ViewArea(47.3, 52.9, 12.0, 0.6)
    w = ViewArea(47.3, 52.9, 12.0, 0.6 + math.pi)
    img = m.rasterize(v, 16)
    flipped = m.rasterize(w, 16)[::-1, ::-1]
    assert np.allclose(img, flipped, atol=1e-9)


def test_rasterize_rejects_views_outside_world():
    m = WorldMap(map_seed=5)
    with pytest.raises(ValueError):
        m.rasterize(ViewArea(2.0, 50.0, 10.0), 16)   # spills over x=0
    with pytest.raises(ValueError):
        m.rasterize(ViewArea(50.0, 99.0, 10.0), 16)  # spills over the top
    # same center fits when the view is small enough
    m.rasterize(ViewArea(2.0, 50.0, 2.0), 8)


def test_world_validation():
    with pytest.raises(ValueError):
        WorldMap(map_seed=1, world_side=0.0)
    with pytest.raises(ValueError):
        WorldMap(map_seed=1, octaves=0)
