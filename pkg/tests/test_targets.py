from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from footpose.exceptions import InvalidGeometryError
from footpose.skeleton import DEFAULT_SKELETON, FootInstance, Skeleton
from footpose.targets import OutputTensors, encode, encode_heatmaps, encode_pafs, encode_segmentation


def _instance(points):
    kp = np.full((8, 2), np.nan)
    for k, p in points.items():
        kp[k] = p
    return FootInstance(kp)


def test_skeleton_default_properties():
    assert len(DEFAULT_SKELETON) == 7
    assert (1, 3) in DEFAULT_SKELETON.edges
    assert DEFAULT_SKELETON.is_connected()


@pytest.mark.parametrize(
    "edges",
    [
        ((1, 3),) * 6,
        ((0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7)),  # two components
        ((0, 0), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7)),
    ],
)
def test_invalid_skeleton_rejected(edges):
    with pytest.raises(ValueError):
        Skeleton(edges)


def test_heatmap_peak_and_falloff():
    hm = encode_heatmaps([_instance({0: (32, 32)})], sigma=2.0)
    assert np.unravel_index(np.argmax(hm[0]), hm[0].shape) == (32, 32)
    assert hm[0, 32, 32] == 1.0
    assert abs(hm[0, 32, 34] - np.exp(-0.5)) < 1e-15
    assert abs(hm[0, 32, 34] - 0.6065) < 1e-4
    assert not hm[1:].any()


def test_heatmap_empty_and_max_combination():
    assert not encode_heatmaps([]).any()
    a, b = (20.3, 30.1), (24.9, 33.7)
    hm = encode_heatmaps([_instance({2: a}), _instance({2: b})], sigma=2.0)
    ys, xs = np.mgrid[0:64, 0:64]
    g = lambda p: np.exp(-((xs - p[0]) ** 2 + (ys - p[1]) ** 2) / 8.0)
    np.testing.assert_allclose(hm[2], np.maximum(g(a), g(b)), atol=1e-15)


def test_paf_horizontal_and_vertical():
    inst = _instance({1: (10, 20), 3: (40, 20), 4: (50, 10), 6: (50, 40)})
    paf = encode_pafs([inst], half_width=1.0)
    # edge 0 is (1, 3): left to right
    assert np.all(paf[0, 20, 10:41] == 1.0) and np.all(paf[1, 20, 10:41] == 0.0)
    assert np.all(paf[0, 19:22, 10:41] == 1.0)
    assert not paf[0, 23].any()
    # edge 3 is (4, 6): top to bottom
    assert np.all(paf[6, 10:41, 50] == 0.0) and np.all(paf[7, 10:41, 50] == 1.0)


def test_paf_antiparallel_overlap_averages_to_zero():
    a = _instance({1: (10, 20), 3: (40, 20)})
    b = _instance({1: (40, 20), 3: (10, 20)})
    paf = encode_pafs([a, b])
    assert np.all(paf[0, 20, 10:41] == 0.0)


def test_paf_degenerate_edge_reported():
    inst = _instance({1: (10, 20), 3: (10, 20)})
    paf, diag = encode_pafs([inst], return_diagnostics=True)
    assert diag == [(0, 0)]
    assert not paf.any()


@given(st.lists(st.tuples(st.floats(0, 63), st.floats(0, 63)), min_size=16, max_size=16))
def test_paf_magnitude_at_most_one(pts):
    insts = [FootInstance(np.array(pts[:8])), FootInstance(np.array(pts[8:]))]
    paf = encode_pafs(insts, half_width=1.5)
    mag = np.hypot(paf[0::2], paf[1::2])
    assert mag.max() <= 1.0 + 1e-12


def test_segmentation_examples():
    rect = [[10, 10], [20, 10], [20, 20], [10, 20]]
    seg = encode_segmentation([rect], [])
    assert seg[0].sum() == 121 and not seg[1].any()
    assert not encode_segmentation([], []).any()
    full = [[0, 0], [63, 0], [63, 63], [0, 63]]
    assert encode_segmentation(full, full)[1].sum() == 4096


def test_segmentation_rejects_self_intersection():
    with pytest.raises(InvalidGeometryError):
        encode_segmentation([[[0, 0], [10, 10], [10, 0], [0, 10]]], [])


def test_output_tensor_shapes_and_stacking():
    t = encode([_instance({0: (5, 5)})])
    assert t.heatmap.shape == (8, 64, 64) and t.pafmap.shape == (14, 64, 64) and t.segmap.shape == (2, 64, 64)
    s = t.stacked()
    assert s.shape == (24, 64, 64)
    back = OutputTensors.from_stacked(s)
    assert np.array_equal(back.heatmap, t.heatmap) and np.array_equal(back.segmap, t.segmap)
    with pytest.raises(ValueError):
        OutputTensors(np.zeros((7, 64, 64)), np.zeros((14, 64, 64)), np.zeros((2, 64, 64)))
