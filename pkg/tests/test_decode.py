from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from footpose.decode import PeakCandidate, connection_score, decode, extract_peaks, group_keypoints
from footpose.exceptions import UndefinedDirectionError
from footpose.skeleton import DEFAULT_SKELETON, FootInstance
from footpose.targets import encode, encode_heatmaps

from scenes import spread_keypoints, two_foot_scene


def brute_force_maxima(channel, threshold):
    """Strict scan: pixel is at least every 8-neighbor and above threshold."""
    h, w = channel.shape
    out = []
    for r in range(h):
        for c in range(w):
            v = channel[r, c]
            if v <= threshold:
                continue
            nb = channel[max(r - 1, 0) : r + 2, max(c - 1, 0) : c + 2]
            if v >= nb.max():
                out.append((c, r))
    return out


def test_zero_heatmap_has_no_peaks():
    assert extract_peaks(np.zeros((8, 64, 64))) == []


@pytest.mark.parametrize("center", [(32.0, 32.0), (32.3, 31.8), (10.45, 50.2)])
def test_single_gaussian_peak_position(center):
    hm = encode_heatmaps([FootInstance(np.tile(center, (8, 1)))])
    peaks = extract_peaks(hm)
    assert len(peaks) == 8
    for p in peaks:
        assert abs(p.x - center[0]) <= 0.25 and abs(p.y - center[1]) <= 0.25


def test_two_gaussians_two_candidates():
    kp = np.full((8, 2), np.nan)
    kp[0] = (16, 16)
    kp2 = kp.copy()
    kp2[0] = (48, 48)
    hm = encode_heatmaps([FootInstance(kp), FootInstance(kp2)])
    peaks = extract_peaks(hm)
    assert [(round(p.x), round(p.y)) for p in peaks] == [(16, 16), (48, 48)] or [
        (round(p.x), round(p.y)) for p in peaks
    ] == [(48, 48), (16, 16)]
    assert sorted(brute_force_maxima(hm[0], 0.3)) == [(16, 16), (48, 48)]


def test_peaks_match_brute_force_scan(rng):
    for _ in range(5):
        kp = rng.uniform(5, 58, (8, 2))
        hm = encode_heatmaps([FootInstance(kp), FootInstance(rng.uniform(5, 58, (8, 2)))])
        peaks = extract_peaks(hm, threshold=0.3, nms_radius=1.0)
        for ch in range(8):
            mine = np.array([(p.x, p.y) for p in peaks if p.channel == ch]).reshape(-1, 2)
            oracle = np.array(brute_force_maxima(hm[ch], 0.3), dtype=float).reshape(-1, 2)
            assert len(mine) == len(oracle)
            # sub-pixel refinement moves a peak by at most half a pixel
            for m in mine:
                assert np.abs(oracle - m).max(axis=1).min() <= 0.5


def test_nms_suppresses_weaker_neighbor():
    hm = np.zeros((8, 64, 64))
    hm[0, 20, 20] = 0.9
    hm[0, 20, 22] = 0.8
    peaks = extract_peaks(hm, nms_radius=3.0)
    assert len(peaks) == 1 and peaks[0].score == 0.9


def test_peak_parameters_validated():
    with pytest.raises(ValueError):
        extract_peaks(np.zeros((8, 4, 4)), threshold=0.0)
    with pytest.raises(ValueError):
        extract_peaks(np.zeros((8, 4, 4)), nms_radius=0.5)


def _uniform_field(direction, edge=0):
    paf = np.zeros((14, 64, 64))
    paf[2 * edge] = direction[0]
    paf[2 * edge + 1] = direction[1]
    return paf


def test_connection_score_examples():
    d = np.array([3.0, 4.0]) / 5.0
    assert connection_score(_uniform_field(d), 0, (10, 10), (40, 50)) == pytest.approx(1.0, abs=1e-12)
    assert connection_score(_uniform_field((-d[1], d[0])), 0, (10, 10), (40, 50)) == pytest.approx(0.0, abs=1e-12)
    assert connection_score(np.zeros((14, 64, 64)), 0, (10, 10), (40, 50)) == 0.0
    with pytest.raises(UndefinedDirectionError):
        connection_score(np.zeros((14, 64, 64)), 0, (10, 10), (10, 10))


@given(st.floats(0, 63), st.floats(0, 63), st.floats(0, 63), st.floats(0, 63), st.integers(0, 6))
def test_connection_score_bounded(ax, ay, bx, by, e):
    if np.hypot(bx - ax, by - ay) < 1e-6:
        return
    insts = [FootInstance(np.random.default_rng(e).uniform(0, 63, (8, 2))) for _ in range(2)]
    paf = encode(insts).pafmap
    s = connection_score(paf, e, (ax, ay), (bx, by))
    assert -1.0 - 1e-12 <= s <= 1.0 + 1e-12


def test_one_foot_round_trip(model, rng):
    kp = spread_keypoints(rng)
    inst = decode(encode([FootInstance(kp)]))
    assert len(inst) == 1 and inst[0].completeness == 8
    assert np.abs(inst[0].keypoints - kp).max() <= 0.5


def _pairing_score(paf, feet, choice):
    total = 0.0
    for e, (a, b) in enumerate(DEFAULT_SKELETON.edges):
        src = [feet[0][a], feet[1][a]]
        dst = [feet[1][b], feet[0][b]] if choice[e] else [feet[0][b], feet[1][b]]
        total += sum(connection_score(paf, e, p, q) for p, q in zip(src, dst))
    return total


def test_two_feet_grouping_is_score_optimal(model, rng):
    for _ in range(5):
        truth = two_foot_scene(model, rng, noise=0.0)
        tensors = encode(truth)
        found = decode(tensors)
        assert len(found) == 2 and all(f.completeness == 8 for f in found)
        feet = [t.keypoints for t in truth]
        for f in found:
            owner = np.argmin([np.abs(f.keypoints - t).max() for t in feet])
            assert np.abs(f.keypoints - feet[owner]).max() <= 0.5
        scores = {c: _pairing_score(tensors.pafmap, feet, c) for c in itertools.product((0, 1), repeat=7)}
        assert max(scores, key=scores.get) == (0,) * 7


def test_low_scores_give_singletons():
    cands = [PeakCandidate(ch, 10.0 + 5 * ch + 30 * k, 10.0 + 20 * k, 0.9) for k in range(2) for ch in range(8)]
    out = group_keypoints(cands, np.zeros((14, 64, 64)), min_score=0.4)
    assert len(out) == 16 and all(i.completeness == 1 for i in out)


def test_same_channel_never_merged(model, rng):
    truth = two_foot_scene(model, rng, noise=0.0)
    for inst in decode(encode(truth)):
        assert len(inst.candidate_ids) == inst.completeness
