from __future__ import annotations

import numpy as np
import pytest
import shapely
from hypothesis import given
from hypothesis import strategies as st

from footpose.exceptions import InvalidGeometryError
from footpose.raster import check_simple, fill_polygon, is_simple, signed_area


def brute_force_fill(vertices, width, height):
    """Pixel-center membership by an independent geometry library (boundary inclusive)."""
    poly = shapely.Polygon(vertices)
    xs, ys = np.meshgrid(np.arange(width), np.arange(height))
    pts = shapely.points(xs.ravel(), ys.ravel())
    return (shapely.distance(poly, pts) <= 1e-9).reshape(height, width)


def test_rectangle_has_121_pixels():
    m = fill_polygon([[10, 10], [20, 10], [20, 20], [10, 20]], 64, 64)
    assert m.sum() == 121
    assert np.array_equal(m, brute_force_fill([[10, 10], [20, 10], [20, 20], [10, 20]], 64, 64))


def test_full_frame_and_clipping():
    assert fill_polygon([[0, 0], [63, 0], [63, 63], [0, 63]], 64, 64).all()
    assert fill_polygon([[-10, -10], [100, -10], [100, 100], [-10, 100]], 64, 64).all()
    assert not fill_polygon([[100, 100], [110, 100], [110, 110]], 64, 64).any()


def test_orientation_does_not_matter():
    v = np.array([[3.2, 4.1], [40.7, 9.9], [30.5, 50.2], [8.8, 33.3]])
    assert np.array_equal(fill_polygon(v, 64, 64), fill_polygon(v[::-1], 64, 64))


def test_signed_area_sign():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    assert signed_area(sq) == 1.0
    assert signed_area(sq[::-1]) == -1.0


def test_bowtie_is_not_simple():
    bowtie = [[0, 0], [10, 10], [10, 0], [0, 10]]
    assert not is_simple(bowtie)
    with pytest.raises(InvalidGeometryError) as info:
        check_simple(bowtie)
    assert info.value.polygon is not None


star = st.lists(st.floats(4.0, 28.0), min_size=3, max_size=24)


@given(star, st.floats(20.0, 44.0), st.floats(20.0, 44.0), st.floats(0, 6.28))
def test_star_polygons_match_brute_force(radii, cx, cy, phase):
    n = len(radii)
    ang = phase + 2 * np.pi * np.arange(n) / n
    v = np.column_stack([cx + np.array(radii) * np.cos(ang), cy + np.array(radii) * np.sin(ang)])
    assert np.array_equal(fill_polygon(v, 64, 64), brute_force_fill(v, 64, 64))


@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), min_size=3, max_size=10), st.integers(0, 3))
def test_lattice_polygons_match_brute_force(pts, scale):
    # integer and half-integer vertices put many pixel centers exactly on edges
    v = np.array(pts, dtype=float) * (1 + scale) / 2
    if not is_simple(v):
        return
    assert np.array_equal(fill_polygon(v, 64, 64), brute_force_fill(v, 64, 64))
