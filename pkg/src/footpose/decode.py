"""Decode output tensors into per-foot keypoint groups.

Peaks are read from the heatmaps, candidate pairs along each skeleton edge
are scored with a PAF line integral, and greedily accepted pairs are merged
into foot instances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, NamedTuple

import numpy as np
from scipy.ndimage import maximum_filter

from .exceptions import UndefinedDirectionError
from .skeleton import DEFAULT_SKELETON, NUM_KEYPOINTS, FootInstance, Skeleton

DEFAULT_THRESHOLD = 0.3
DEFAULT_NMS_RADIUS = 3.0
DEFAULT_N_SAMPLES = 10
DEFAULT_MIN_SCORE = 0.4

_LOG_FLOOR = 1e-12


class PeakCandidate(NamedTuple):
    channel: int
    x: float
    y: float
    score: float

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


def _refine(hm, r, c):
    """Sub-pixel offset from a quadratic fit to the log-heatmap around (r, c).

    A Newton step on the 3x3 finite-difference gradient and Hessian; exact
    for Gaussian peaks. Axes touching the border are left unrefined.
    """
    h, w = hm.shape
    if not (0 < r < h - 1 and 0 < c < w - 1):
        return 0.0, 0.0
    L = np.log(np.maximum(hm[r - 1 : r + 2, c - 1 : c + 2], _LOG_FLOOR))
    gx = 0.5 * (L[1, 2] - L[1, 0])
    gy = 0.5 * (L[2, 1] - L[0, 1])
    hxx = L[1, 2] - 2 * L[1, 1] + L[1, 0]
    hyy = L[2, 1] - 2 * L[1, 1] + L[0, 1]
    hxy = 0.25 * (L[2, 2] - L[2, 0] - L[0, 2] + L[0, 0])
    det = hxx * hyy - hxy * hxy
    if hxx < 0 and det > 0:
        dx = -(hyy * gx - hxy * gy) / det
        dy = -(hxx * gy - hxy * gx) / det
    else:
        # not a proper maximum of the fit; fall back to per-axis parabolas
        dx = -gx / hxx if hxx < 0 else 0.0
        dy = -gy / hyy if hyy < 0 else 0.0
    return float(np.clip(dx, -0.5, 0.5)), float(np.clip(dy, -0.5, 0.5))


def extract_peaks(
    heatmap, threshold: float = DEFAULT_THRESHOLD, nms_radius: float = DEFAULT_NMS_RADIUS
) -> List[PeakCandidate]:
    """Local maxima above ``threshold``, greedily non-max suppressed per channel.

    Returned candidates are ordered by channel, then by decreasing score.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must be in (0, 1)")
    if nms_radius < 1:
        raise ValueError("nms_radius must be >= 1")
    hm = np.asarray(heatmap, dtype=np.float64)
    if hm.ndim == 2:
        hm = hm[None]
    local_max = maximum_filter(hm, size=(1, 3, 3), mode="constant", cval=-np.inf)
    is_peak = (hm == local_max) & (hm > threshold)
    out = []
    r2 = nms_radius * nms_radius
    for ch in range(hm.shape[0]):
        rows, cols = np.nonzero(is_peak[ch])
        if len(rows) == 0:
            continue
        scores = hm[ch, rows, cols]
        order = np.lexsort((cols, rows, -scores))
        kept = []
        for i in order:
            r, c = rows[i], cols[i]
            if any((r - kr) ** 2 + (c - kc) ** 2 <= r2 for kr, kc in kept):
                continue
            kept.append((r, c))
            dx, dy = _refine(hm[ch], r, c)
            out.append(PeakCandidate(ch, c + dx, r + dy, float(scores[i])))
    return out


def _bilinear(channel, xs, ys):
    h, w = channel.shape
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(xs).astype(np.int64), w - 2) if w > 1 else np.zeros_like(xs, dtype=np.int64)
    y0 = np.minimum(np.floor(ys).astype(np.int64), h - 2) if h > 1 else np.zeros_like(ys, dtype=np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = channel[y0, x0] * (1 - fx) + channel[y0, x1] * fx
    bot = channel[y1, x0] * (1 - fx) + channel[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def _pair_scores(pafmap, edge_index, pa, pb, n_samples):
    """Line-integral scores for every pair in ``pa x pb``; NaN for coincident pairs."""
    pa = np.asarray(pa, dtype=np.float64).reshape(-1, 1, 1, 2)
    pb = np.asarray(pb, dtype=np.float64).reshape(1, -1, 1, 2)
    d = pb - pa
    length = np.linalg.norm(d, axis=-1, keepdims=True)
    u = np.divide(d, length, out=np.zeros_like(d), where=length > 1e-12)
    t = np.linspace(0.0, 1.0, n_samples).reshape(1, 1, -1, 1)
    pts = pa + t * d
    fx = _bilinear(pafmap[2 * edge_index], pts[..., 0], pts[..., 1])
    fy = _bilinear(pafmap[2 * edge_index + 1], pts[..., 0], pts[..., 1])
    s = (fx * u[..., 0] + fy * u[..., 1]).mean(axis=-1)
    s[length[..., 0, 0] <= 1e-12] = np.nan
    return s


def connection_score(pafmap, edge_index: int, pA, pB, n_samples: int = DEFAULT_N_SAMPLES) -> float:
    """Mean dot product of the PAF with the unit vector ``pA -> pB``.

    The field is bilinearly sampled at ``n_samples`` equidistant points
    including both endpoints.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    pA = np.asarray(pA, dtype=np.float64)
    pB = np.asarray(pB, dtype=np.float64)
    if np.linalg.norm(pB - pA) <= 1e-12:
        raise UndefinedDirectionError("connection endpoints coincide")
    paf = np.asarray(pafmap, dtype=np.float64)
    return float(_pair_scores(paf, edge_index, pA, pB, n_samples)[0, 0])


@dataclass
class _Components:
    """Union-find over candidates that refuses merges with clashing channels."""

    channels: list

    def __post_init__(self):
        self.parent = list(range(len(self.channels)))
        self.members = {i: {ch: i} for i, ch in enumerate(self.channels)}

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j) -> bool:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return True
        mi, mj = self.members[ri], self.members[rj]
        if mi.keys() & mj.keys():
            return False
        if len(mi) < len(mj):
            ri, rj, mi, mj = rj, ri, mj, mi
        self.parent[rj] = ri
        mi.update(mj)
        del self.members[rj]
        return True


def group_keypoints(
    candidates,
    pafmap,
    skeleton: Skeleton = DEFAULT_SKELETON,
    min_score: float = DEFAULT_MIN_SCORE,
    n_samples: int = DEFAULT_N_SAMPLES,
) -> List[FootInstance]:
    """Assemble peak candidates into foot instances.

    Per skeleton edge, every cross-channel candidate pair is scored and
    pairs at or above ``min_score`` are accepted greedily by score, each
    candidate joining at most one pair per edge. Accepted pairs are then
    merged (strongest first) into connected components; a merge that would
    put two candidates of one channel into the same foot is dropped.
    Unmerged candidates come back as single-keypoint instances.

    Instances are sorted by completeness, then mean confidence, both
    descending.
    """
    if not 0 < min_score <= 1:
        raise ValueError("min_score must be in (0, 1]")
    cands = list(candidates)
    paf = np.asarray(pafmap, dtype=np.float64)
    by_channel = {}
    for i, c in enumerate(cands):
        by_channel.setdefault(int(c.channel), []).append(i)

    accepted = []
    for e, (a, b) in enumerate(skeleton.edges):
        ia, ib = by_channel.get(a, []), by_channel.get(b, [])
        if not ia or not ib:
            continue
        pa = [(cands[i].x, cands[i].y) for i in ia]
        pb = [(cands[j].x, cands[j].y) for j in ib]
        s = _pair_scores(paf, e, pa, pb, n_samples)
        pairs = [
            (s[m, n], ia[m], ib[n])
            for m in range(len(ia))
            for n in range(len(ib))
            if np.isfinite(s[m, n]) and s[m, n] >= min_score
        ]
        pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
        used_a, used_b = set(), set()
        for score, i, j in pairs:
            if i in used_a or j in used_b:
                continue
            used_a.add(i)
            used_b.add(j)
            accepted.append((score, e, i, j))

    comps = _Components([int(c.channel) for c in cands])
    accepted.sort(key=lambda p: (-p[0], p[1], p[2], p[3]))
    for _, _, i, j in accepted:
        comps.union(i, j)

    instances = []
    for root in sorted(comps.members):
        members = comps.members[root]
        kp = np.full((NUM_KEYPOINTS, 2), np.nan)
        conf = np.full(NUM_KEYPOINTS, np.nan)
        for ch, i in members.items():
            kp[ch] = (cands[i].x, cands[i].y)
            conf[ch] = cands[i].score
        instances.append(FootInstance(kp, conf, tuple(sorted(members.values()))))
    instances.sort(key=lambda inst: (-inst.completeness, -inst.mean_confidence, inst.candidate_ids))
    return instances


def decode(
    tensors,
    skeleton: Skeleton = DEFAULT_SKELETON,
    threshold: float = DEFAULT_THRESHOLD,
    nms_radius: float = DEFAULT_NMS_RADIUS,
    min_score: float = DEFAULT_MIN_SCORE,
    n_samples: int = DEFAULT_N_SAMPLES,
) -> List[FootInstance]:
    """Peaks then grouping for one frame of :class:`~footpose.targets.OutputTensors`."""
    peaks = extract_peaks(tensors.heatmap, threshold, nms_radius)
    return group_keypoints(peaks, tensors.pafmap, skeleton, min_score, n_samples)
