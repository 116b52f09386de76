"""2D occlusion region where the leg passes through the shoe opening.

The rendered shoe mask has an outer silhouette ``S0`` and, because the
opening is transparent, an inner silhouette ``S1``. Where the leg mask
crosses ``S0`` we get anchors ``M0, M1``; their nearest points on ``S1``
are ``N0, N1``. The band ``M0 -> N0 -> (S1 arc) -> N1 -> M1 -> (S0 arc)``
is the region to render transparent.

Contours run through pixel centers and are counterclockwise in ``(x, y)``
pixel coordinates (positive shoelace area), which appears clockwise on
screen since ``y`` points down.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from .exceptions import DegenerateGeometryError, MissingOpeningError, TopologyError
from .raster import check_simple, fill_polygon, signed_area

_FOUR = ndimage.generate_binary_structure(2, 1)
_EIGHT = ndimage.generate_binary_structure(2, 2)

# Moore neighborhood as (drow, dcol), clockwise on screen starting west
_NEIGHBORS = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))
# after stepping in direction d, the last background pixel checked (direction
# d - 1 from the old pixel) seen from the new pixel
_BACKTRACK = tuple(
    _NEIGHBORS.index((_NEIGHBORS[(d + 7) % 8][0] - _NEIGHBORS[d][0], _NEIGHBORS[(d + 7) % 8][1] - _NEIGHBORS[d][1]))
    for d in range(8)
)


@dataclass(frozen=True)
class Contour:
    """Closed polygon of ``(x, y)`` pixel-center vertices, counterclockwise."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 2)
        if len(v) < 3:
            raise ValueError("a contour needs at least 3 vertices")
        if signed_area(v) < 0:
            v = v[::-1].copy()
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __len__(self):
        return len(self.vertices)

    def point(self, edge: int, t: float) -> np.ndarray:
        a = self.vertices[edge % len(self)]
        b = self.vertices[(edge + 1) % len(self)]
        return a + t * (b - a)

    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.roll(self.vertices, -1, axis=0) - self.vertices, axis=1)

    def fill(self, width: int, height: int) -> np.ndarray:
        return fill_polygon(self.vertices, width, height)


@dataclass(frozen=True)
class ContourAnchor:
    """A point on a contour, at parameter ``t`` in ``[0, 1)`` along edge ``edge``."""

    contour: Contour
    edge: int
    t: float

    def __post_init__(self):
        if not 0 <= self.t < 1:
            raise ValueError(f"anchor parameter must be in [0, 1), got {self.t}")
        object.__setattr__(self, "edge", int(self.edge) % len(self.contour))

    @property
    def point(self) -> np.ndarray:
        return self.contour.point(self.edge, self.t)

    @property
    def position(self) -> float:
        """Arc position in edge units, used for ordering along the contour."""
        return self.edge + self.t


def _as_mask(mask) -> np.ndarray:
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ValueError("masks must be 2D")
    return m > 0 if m.dtype != bool else m


def trace_boundary(region) -> np.ndarray:
    """Moore-neighbor trace of the outer boundary of a single 8-connected region.

    Returns the boundary pixel centers ``(x, y)`` in tracing order, each
    visit once per pass (a pixel may repeat where the region is 1 px thin).
    """
    region = _as_mask(region)
    padded = np.pad(region, 1)
    w = padded.shape[1]
    flat = padded.ravel()
    idx = np.flatnonzero(flat)
    if len(idx) == 0:
        raise TopologyError("empty region")
    # raster-first pixel: its west neighbor is background
    start = int(idx[0])
    if len(idx) > 1:
        step = [dr * w + dc for dr, dc in _NEIGHBORS]
        path = [start]
        cur, back = start, 0
        first_move = None
        while True:
            for k in range(1, 9):
                d = (back + k) & 7
                nxt = cur + step[d]
                if flat[nxt]:
                    break
            else:
                break
            if first_move is None:
                first_move = (cur, nxt)
            elif first_move == (cur, nxt):
                break
            back = _BACKTRACK[d]
            cur = nxt
            path.append(cur)
        if path[-1] == path[0]:
            path.pop()
    else:
        path = [start]
    p = np.asarray(path)
    return np.stack([p % w - 1, p // w - 1], axis=1).astype(np.float64)


def extract_silhouettes(shoe_mask) -> Tuple[Contour, Contour]:
    """Outer silhouette ``S0`` and opening silhouette ``S1`` of a shoe render mask.

    ``S0`` runs through the outermost foreground pixels, ``S1`` through the
    background pixels of the opening that touch the shoe, so that
    ``fill(S0) - fill(S1)`` is exactly the foreground for simply shaped
    masks.

    Raises
    ------
    TopologyError
        The mask does not have exactly one 4-connected foreground component.
    MissingOpeningError
        The component has no hole.
    """
    full = _as_mask(shoe_mask)
    rows = np.nonzero(full.any(axis=1))[0]
    if len(rows) == 0:
        raise TopologyError("shoe mask must have exactly one component, found 0")
    cols = np.nonzero(full.any(axis=0))[0]
    # work in the foreground's bounding box plus a 1 px background ring; the
    # ring is one background component, so hole detection is unchanged
    r0, c0 = rows[0], cols[0]
    mask = np.pad(full[r0 : rows[-1] + 1, c0 : cols[-1] + 1], 1)
    offset = np.array([c0 - 1, r0 - 1], dtype=np.float64)
    labels, n = ndimage.label(mask, structure=_FOUR)
    if n != 1:
        raise TopologyError(f"shoe mask must have exactly one component, found {n}")
    # background components use the dual (8-) connectivity
    bg_labels, n_bg = ndimage.label(~mask, structure=_EIGHT)
    holes = [i for i in range(1, n_bg + 1) if i != bg_labels[0, 0]]
    if not holes:
        raise MissingOpeningError("shoe mask has no opening (no interior hole)")
    if len(holes) > 1:
        raise TopologyError(f"shoe mask must have exactly one opening, found {len(holes)}")
    s0 = Contour(trace_boundary(mask) + offset)
    hole = bg_labels == holes[0]
    s1 = Contour(trace_boundary(hole) + offset) if hole.sum() >= 3 else _tiny_contour(hole, offset)
    return s0, s1


def _tiny_contour(hole, offset):
    # 1-2 pixel openings: a thin box around the pixels keeps S1 usable
    ys, xs = np.nonzero(hole)
    x0, x1 = xs.min() + offset[0], xs.max() + offset[0]
    y0, y1 = ys.min() + offset[1], ys.max() + offset[1]
    e = 1e-3
    return Contour(np.array([[x0 - e, y0 - e], [x1 + e, y0 - e], [x1 + e, y1 + e], [x0 - e, y1 + e]]))


def _sample(mask, pts):
    h, w = mask.shape
    c = np.floor(pts[:, 0] + 0.5).astype(np.int64)
    r = np.floor(pts[:, 1] + 0.5).astype(np.int64)
    ok = (c >= 0) & (c < w) & (r >= 0) & (r < h)
    out = np.zeros(len(pts), dtype=bool)
    out[ok] = mask[r[ok], c[ok]]
    return out


def mask_contour_intersections(leg_mask, s0: Contour) -> Optional[Tuple[ContourAnchor, ContourAnchor]]:
    """Where the leg mask crosses ``S0``, or ``None`` when it does not.

    Leg membership is sampled at every contour vertex (nearest pixel); each
    edge whose endpoints disagree is a crossing, anchored at its midpoint.
    Inside-leg runs of a single vertex are contacts, not crossings, and are
    ignored. With more than one run, the longest (by arc length) wins.
    ``M0`` starts the inside-leg run and ``M1`` ends it, so the inside arc
    runs ``M0 -> M1`` in contour order.
    """
    leg = _as_mask(leg_mask)
    inside = _sample(leg, s0.vertices)
    n = len(s0)
    if inside.all() or not inside.any():
        return None
    lengths = s0.edge_lengths()
    # rotate so index 0 is outside; runs then never wrap
    off = int(np.argmin(inside))
    ins = np.roll(inside, -off)
    runs = []
    i = 0
    while i < n:
        if ins[i]:
            j = i
            while j + 1 < n and ins[j + 1]:
                j += 1
            runs.append((i, j))
            i = j + 1
        else:
            i += 1
    best = None
    for i, j in runs:
        if j == i:
            continue
        first, last = (i + off) % n, (j + off) % n
        idx = (np.arange(i - 1, j + 1) + off) % n
        arc = float(lengths[idx].sum())
        key = (arc, -first)
        if best is None or key > best[0]:
            best = (key, first, last)
    if best is None:
        return None
    _, first, last = best
    m0 = ContourAnchor(s0, (first - 1) % n, 0.5)
    m1 = ContourAnchor(s0, last, 0.5)
    return m0, m1


def nearest_contour_point(s1: Contour, m) -> ContourAnchor:
    """Anchor on ``S1`` closest to ``m`` (an anchor or a 2D point).

    Ties go to the lowest edge index, then the lowest ``t``.
    """
    p = m.point if isinstance(m, ContourAnchor) else np.asarray(m, dtype=np.float64)
    a = s1.vertices
    b = np.roll(a, -1, axis=0)
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    t = np.divide(np.einsum("ij,ij->i", p - a, d), dd, out=np.zeros(len(a)), where=dd > 0)
    t = np.clip(t, 0.0, 1.0)
    dist = np.linalg.norm(a + t[:, None] * d - p, axis=1)
    n = len(a)
    edge = np.arange(n)
    # t == 1 is the next edge's t == 0
    wrap = t >= 1.0
    edge = np.where(wrap, (edge + 1) % n, edge)
    t = np.where(wrap, 0.0, t)
    dmin = dist.min()
    tied = np.nonzero(dist <= dmin + 1e-12 * max(1.0, dmin))[0]
    k = min(tied, key=lambda i: (edge[i], t[i]))
    return ContourAnchor(s1, int(edge[k]), float(t[k]))


def _arc(contour: Contour, start: ContourAnchor, end: ContourAnchor, forward: bool) -> np.ndarray:
    """Points from ``start`` to ``end`` along the contour, inclusive of both anchors."""
    n = len(contour)
    v = contour.vertices
    pts = [start.point]
    if forward:
        if not (start.edge == end.edge and end.t >= start.t):
            k = (start.edge + 1) % n
            while True:
                pts.append(v[k])
                if k == end.edge:
                    break
                k = (k + 1) % n
    else:
        if not (start.edge == end.edge and end.t <= start.t):
            stop = (end.edge + 1) % n
            k = start.edge
            while True:
                if not (k == start.edge and start.t == 0.0 and len(pts) == 1):
                    pts.append(v[k])
                if k == stop:
                    break
                k = (k - 1) % n
    pts.append(end.point)
    out = np.array(pts)
    keep = np.ones(len(out), dtype=bool)
    keep[1:] = np.any(np.diff(out, axis=0) != 0, axis=1)
    return out[keep]


def _arc_length(contour, start, end, forward):
    pts = _arc(contour, start, end, forward)
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()), pts


def occlusion_polygon(m0, n0, m1, n1, s0: Contour, s1: Contour, leg_mask=None) -> np.ndarray:
    """Closed polygon ``M0 -> N0 -> (S1 arc) -> N1 -> M1 -> (S0 arc back to M0)``.

    The ``S1`` arc is the side whose midpoint lies inside the leg mask when
    exactly one side does; otherwise the shorter side.
    """
    len_f, arc_f = _arc_length(s1, n0, n1, True)
    len_b, arc_b = _arc_length(s1, n0, n1, False)
    choice = None
    if leg_mask is not None:
        leg = _as_mask(leg_mask)
        mid_f = _sample(leg, _midpoint(arc_f)[None])[0]
        mid_b = _sample(leg, _midpoint(arc_b)[None])[0]
        if mid_f != mid_b:
            choice = arc_f if mid_f else arc_b
    if choice is None:
        choice = arc_f if len_f <= len_b else arc_b
    # the inside-leg S0 arc runs M0 -> M1 forward, so walk it backward from M1
    s0_arc = _arc(s0, m1, m0, False)
    poly = np.vstack([m0.point[None], choice, s0_arc[:-1]])
    return poly


def _midpoint(pts):
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    total = seg.sum()
    if total == 0:
        return pts[0]
    target = total / 2
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    k = int(np.searchsorted(cum, target, side="right") - 1)
    k = min(k, len(seg) - 1)
    f = (target - cum[k]) / seg[k] if seg[k] > 0 else 0.0
    return pts[k] + f * (pts[k + 1] - pts[k])


def build_occlusion_mask(m0, n0, m1, n1, s0: Contour, s1: Contour, width: int, height: int, leg_mask=None):
    """Rasterize the occlusion polygon, restricted to the shoe band ``fill(S0) - fill(S1)``.

    Raises
    ------
    DegenerateGeometryError
        The assembled polygon is not simple; the polygon is attached.
    """
    poly = occlusion_polygon(m0, n0, m1, n1, s0, s1, leg_mask)
    check_simple(poly, error=DegenerateGeometryError)
    mask = fill_polygon(poly, width, height)
    mask &= s0.fill(width, height)
    mask &= ~s1.fill(width, height)
    return mask


def occlusion_mask(shoe_mask, leg_mask) -> np.ndarray:
    """End to end: silhouettes, anchors, polygon, mask. Empty when the leg misses ``S0``."""
    shoe = _as_mask(shoe_mask)
    leg = _as_mask(leg_mask)
    if leg.shape != shoe.shape:
        raise ValueError(f"leg mask shape {leg.shape} does not match shoe mask shape {shoe.shape}")
    h, w = shoe.shape
    s0, s1 = extract_silhouettes(shoe)
    anchors = mask_contour_intersections(leg, s0)
    if anchors is None:
        return np.zeros((h, w), dtype=bool)
    m0, m1 = anchors
    n0 = nearest_contour_point(s1, m0)
    n1 = nearest_contour_point(s1, m1)
    return build_occlusion_mask(m0, n0, m1, n1, s0, s1, w, h, leg_mask=leg)
