"""Corner pairs between consecutive frames inside the foot region.

FAST-9 corners are detected in the previous frame, tracked forward with
pyramidal Lucas-Kanade and kept only if tracking back lands near the start.
The stabilizer accepts any :class:`MatchedPairs`, so simulated pairs can be
used instead of images.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from PIL import Image
from scipy.ndimage import maximum_filter

# Bresenham circle of radius 3, clockwise from 12 o'clock, as (dx, dy)
CIRCLE = (
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
)  # fmt: skip
ARC_LENGTH = 9
BORDER = 3

DEFAULT_FAST_THRESHOLD = 20.0
DEFAULT_MAX_CORNERS = 200
DEFAULT_WINDOW = 11
DEFAULT_LEVELS = 3
DEFAULT_LK_ITERATIONS = 20
DEFAULT_FB_TOLERANCE = 1.0
DEFAULT_MAX_ERROR = 30.0


@dataclass(frozen=True)
class MatchedPairs:
    """Corresponding corner positions ``prev[i] -> cur[i]`` in pixels."""

    prev: np.ndarray
    cur: np.ndarray

    def __post_init__(self):
        prev = np.asarray(self.prev, dtype=np.float64).reshape(-1, 2)
        cur = np.asarray(self.cur, dtype=np.float64).reshape(-1, 2)
        if prev.shape != cur.shape:
            raise ValueError(f"pair lists differ in length: {len(prev)} vs {len(cur)}")
        object.__setattr__(self, "prev", prev)
        object.__setattr__(self, "cur", cur)

    def __len__(self):
        return len(self.prev)

    @classmethod
    def empty(cls) -> "MatchedPairs":
        return cls(np.zeros((0, 2)), np.zeros((0, 2)))


def fast_scores(image, threshold: float = DEFAULT_FAST_THRESHOLD) -> np.ndarray:
    """FAST-9 corner score per pixel, 0 where the pixel is not a corner.

    A pixel is a corner when at least 9 contiguous circle pixels are all
    brighter than ``center + threshold`` or all darker than
    ``center - threshold``. The score is the sum of absolute differences
    over the longest such arc. The 3 px border is always 0.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    scores = np.zeros((h, w))
    if h <= 2 * BORDER or w <= 2 * BORDER:
        return scores
    center = img[BORDER : h - BORDER, BORDER : w - BORDER]
    diffs = np.stack(
        [img[BORDER + dy : h - BORDER + dy, BORDER + dx : w - BORDER + dx] - center for dx, dy in CIRCLE]
    )
    n = len(CIRCLE)
    best = np.zeros_like(center)
    for sign in (1.0, -1.0):
        d = sign * diffs
        hit = d > threshold
        mag = np.abs(diffs)
        run = np.zeros(center.shape, dtype=np.int32)
        acc = np.zeros_like(center)
        for k in range(2 * n):
            hk = hit[k % n]
            run = np.where(hk, run + 1, 0)
            acc = np.where(hk, acc + mag[k % n], 0.0)
            ok = (run >= ARC_LENGTH) & (run <= n)
            np.maximum(best, np.where(ok, acc, 0.0), out=best)
        full = hit.all(axis=0)
        np.maximum(best, np.where(full, mag.sum(axis=0), 0.0), out=best)
    scores[BORDER : h - BORDER, BORDER : w - BORDER] = best
    return scores


def detect_fast(
    image, mask=None, threshold: float = DEFAULT_FAST_THRESHOLD, max_corners: int = DEFAULT_MAX_CORNERS
) -> np.ndarray:
    """FAST-9 corners inside ``mask``, 3x3 non-max suppressed, strongest first.

    Returns an ``(n, 2)`` array of ``(x, y)`` pixel positions, ``n <= max_corners``.
    """
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("expected a 2D grayscale image")
    scores = fast_scores(img, threshold)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != img.shape:
            raise ValueError(f"mask shape {mask.shape} does not match image shape {img.shape}")
        scores = np.where(mask, scores, 0.0)
    peak = (scores > 0) & (scores == maximum_filter(scores, size=3, mode="constant", cval=0.0))
    ys, xs = np.nonzero(peak)
    order = np.lexsort((xs, ys, -scores[ys, xs]))[:max_corners]
    return np.stack([xs[order], ys[order]], axis=1).astype(np.float64)


def _as_u8(image):
    img = np.asarray(image)
    if img.dtype != np.uint8:
        img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return np.ascontiguousarray(img)


def match_corners(
    prev,
    cur,
    corners,
    window: int = DEFAULT_WINDOW,
    fb_tolerance: float = DEFAULT_FB_TOLERANCE,
    levels: int = DEFAULT_LEVELS,
    iterations: int = DEFAULT_LK_ITERATIONS,
    max_error: float = DEFAULT_MAX_ERROR,
) -> MatchedPairs:
    """Forward-backward checked pyramidal Lucas-Kanade matches for ``corners``.

    A match is kept when both directions converge, the round trip lands
    within ``fb_tolerance`` pixels of the start and the forward patch's mean
    absolute intensity difference is at most ``max_error``. Output order
    follows the input corner order, minus rejected corners.
    """
    prev8, cur8 = _as_u8(prev), _as_u8(cur)
    if prev8.shape != cur8.shape:
        raise ValueError("frames must have identical dimensions")
    if window < 5 or window % 2 == 0:
        raise ValueError("window must be odd and >= 5")
    pts = np.asarray(corners, dtype=np.float32).reshape(-1, 1, 2)
    if len(pts) == 0:
        return MatchedPairs.empty()
    params = dict(
        winSize=(window, window),
        maxLevel=levels - 1,
        criteria=(cv2.TERM_CRITERIA_COUNT | cv2.TERM_CRITERIA_EPS, iterations, 1e-3),
    )
    fwd, st_f, err = cv2.calcOpticalFlowPyrLK(prev8, cur8, pts, None, **params)
    back, st_b, _ = cv2.calcOpticalFlowPyrLK(cur8, prev8, fwd, None, **params)
    p0 = pts.reshape(-1, 2).astype(np.float64)
    p1 = fwd.reshape(-1, 2).astype(np.float64)
    fb = np.linalg.norm(back.reshape(-1, 2).astype(np.float64) - p0, axis=1)
    h, w = prev8.shape
    inside = (p1[:, 0] >= 0) & (p1[:, 0] <= w - 1) & (p1[:, 1] >= 0) & (p1[:, 1] <= h - 1)
    keep = (st_f.ravel() == 1) & (st_b.ravel() == 1) & (fb <= fb_tolerance) & (err.ravel() <= max_error) & inside
    return MatchedPairs(p0[keep], p1[keep])


def track_pairs(prev, cur, foot_mask=None, **kwargs) -> MatchedPairs:
    """Detect corners in ``prev`` (restricted to ``foot_mask``) and match them into ``cur``."""
    fast_kw = {k: kwargs.pop(k) for k in ("threshold", "max_corners") if k in kwargs}
    corners = detect_fast(prev, foot_mask, **fast_kw)
    return match_corners(prev, cur, corners, **kwargs)


def read_pgm(path) -> np.ndarray:
    """8-bit grayscale image as a ``uint8`` array."""
    with Image.open(path) as im:
        if im.mode != "L":
            raise ValueError(f"{path}: expected an 8-bit grayscale PGM, got mode {im.mode}")
        return np.array(im)


def write_pgm(path, image) -> None:
    """Write a binary (P5) PGM; boolean masks are stored as 0/255."""
    img = np.asarray(image)
    if img.dtype == bool:
        img = img.astype(np.uint8) * 255
    Image.fromarray(_as_u8(img)).save(Path(path), format="PPM")
