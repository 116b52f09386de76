from __future__ import annotations

import cv2
import numpy as np
import pytest
from scipy.ndimage import gaussian_filter, shift

from footpose.track import CIRCLE, MatchedPairs, detect_fast, fast_scores, match_corners, read_pgm, track_pairs, write_pgm


def brute_force_fast(img, t):
    """Per-pixel segment test: 9 contiguous circle pixels all brighter or all darker by more than t."""
    img = img.astype(np.float64)
    h, w = img.shape
    out = np.zeros((h, w), dtype=bool)
    for y in range(3, h - 3):
        for x in range(3, w - 3):
            ring = np.array([img[y + dy, x + dx] for dx, dy in CIRCLE]) - img[y, x]
            for flags in (ring > t, ring < -t):
                doubled = np.concatenate([flags, flags])
                run = best = 0
                for f in doubled:
                    run = run + 1 if f else 0
                    best = max(best, run)
                if best >= 9:
                    out[y, x] = True
    return out


def _square_image():
    img = np.full((32, 32), 20, dtype=np.uint8)
    img[12:17, 12:17] = 200
    return img


def _texture(seed, size=96):
    rng = np.random.default_rng(seed)
    return np.clip(gaussian_filter(rng.uniform(0, 255, (size, size)), 1.5) * 2.5 - 190, 0, 255)


def test_uniform_image_has_no_corners():
    assert len(detect_fast(np.full((32, 32), 77, dtype=np.uint8))) == 0


def test_square_corners_found():
    img = _square_image()
    pts = detect_fast(img)
    corners = np.array([(12, 12), (16, 12), (12, 16), (16, 16)])
    # the 5 px square is smaller than the FAST circle, so edge pixels respond too
    for c in corners:
        assert np.min(np.abs(pts - c).max(axis=1)) == 0
    for p in pts:
        assert np.min(np.abs(corners - p).max(axis=1)) <= 2
    assert np.array_equal(fast_scores(img) > 0, brute_force_fast(img, 20.0))


def test_mask_excluding_square_gives_no_corners():
    img = _square_image()
    mask = np.ones_like(img, dtype=bool)
    mask[8:21, 8:21] = False
    assert len(detect_fast(img, mask)) == 0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_segment_test_matches_brute_force_and_opencv(seed):
    img = np.clip(np.random.default_rng(seed).normal(128, 40, (40, 40)), 0, 255).astype(np.uint8)
    mine = fast_scores(img, 25.0) > 0
    assert np.array_equal(mine, brute_force_fast(img, 25.0))
    det = cv2.FastFeatureDetector_create(threshold=25, nonmaxSuppression=False, type=cv2.FAST_FEATURE_DETECTOR_TYPE_9_16)
    theirs = np.zeros_like(mine)
    for kp in det.detect(img):
        theirs[int(round(kp.pt[1])), int(round(kp.pt[0]))] = True
    assert np.array_equal(mine, theirs)


def test_max_corners_and_order():
    img = _texture(3).astype(np.uint8)
    pts = detect_fast(img, max_corners=10)
    assert len(pts) <= 10
    s = fast_scores(img)[pts[:, 1].astype(int), pts[:, 0].astype(int)]
    assert np.all(np.diff(s) <= 0)


def test_lk_recovers_integer_shift():
    prev = _texture(4)
    cur = shift(prev, (0, 3), order=0, mode="nearest")
    mask = np.zeros(prev.shape, dtype=bool)
    mask[16:-16, 16:-16] = True
    pairs = track_pairs(prev, cur, mask)
    assert len(pairs) > 10
    np.testing.assert_allclose(pairs.cur - pairs.prev, np.tile([3.0, 0.0], (len(pairs), 1)), atol=0.2)


def test_lk_identical_frames_zero_motion():
    img = _texture(5)
    pairs = track_pairs(img, img)
    assert len(pairs) > 0
    assert np.abs(pairs.cur - pairs.prev).max() <= 0.05


def test_unrelated_noise_mostly_rejected():
    kept, total = 0, 0
    for seed in range(5):
        rng = np.random.default_rng(100 + seed)
        prev = rng.uniform(0, 255, (96, 96))
        cur = rng.uniform(0, 255, (96, 96))
        corners = detect_fast(prev.astype(np.uint8))
        kept += len(match_corners(prev, cur, corners))
        total += len(corners)
    assert total > 0 and kept / total < 0.1


def test_match_corners_validation():
    img = np.zeros((20, 20))
    assert len(match_corners(img, img, np.zeros((0, 2)))) == 0
    with pytest.raises(ValueError):
        match_corners(img, img, [[5, 5]], window=4)
    with pytest.raises(ValueError):
        match_corners(img, np.zeros((10, 10)), [[5, 5]])


def test_matched_pairs_shape_check():
    with pytest.raises(ValueError):
        MatchedPairs(np.zeros((2, 2)), np.zeros((3, 2)))
    assert len(MatchedPairs.empty()) == 0


def test_pgm_round_trip(tmp_path):
    m = np.zeros((7, 9), dtype=bool)
    m[2:5, 3] = True
    write_pgm(tmp_path / "m.pgm", m)
    back = read_pgm(tmp_path / "m.pgm")
    assert back.dtype == np.uint8 and np.array_equal(back > 0, m)
