"""Polygon rasterization on the integer pixel-center grid.

Pixel ``(row, col)`` has its center at ``x = col, y = row``. A pixel belongs
to a polygon when its center is strictly inside (even-odd rule) or lies on
the boundary, within ``EPS``.
"""

from __future__ import annotations

import numpy as np
import shapely

from .exceptions import InvalidGeometryError

EPS = 1e-9


def as_polygon(vertices) -> np.ndarray:
    """``(n, 2)`` float array with consecutive and closing duplicates removed."""
    v = np.asarray(vertices, dtype=np.float64).reshape(-1, 2)
    if len(v) == 0:
        return v
    keep = np.ones(len(v), dtype=bool)
    keep[1:] = np.any(v[1:] != v[:-1], axis=1)
    v = v[keep]
    while len(v) > 1 and np.array_equal(v[0], v[-1]):
        v = v[:-1]
    return v


def signed_area(vertices) -> float:
    """Shoelace area; positive means counterclockwise in ``(x, y)`` coordinates."""
    v = np.asarray(vertices, dtype=np.float64)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def is_simple(vertices) -> bool:
    v = as_polygon(vertices)
    if len(v) < 3:
        return False
    ring = shapely.LinearRing(np.vstack([v, v[:1]]))
    return bool(ring.is_simple) and abs(signed_area(v)) > 0


def check_simple(vertices, error=InvalidGeometryError):
    if not is_simple(vertices):
        raise error("polygon is degenerate or self-intersecting", polygon=as_polygon(vertices))


def fill_polygon(vertices, width: int, height: int, out=None) -> np.ndarray:
    """Rasterize a closed polygon into a boolean ``(height, width)`` mask.

    Scanline fill over pixel-center rows; boundary pixels are added
    separately so the result is inclusive. If ``out`` is given the polygon
    is OR-ed into it.
    """
    mask = np.zeros((height, width), dtype=bool) if out is None else out
    v = as_polygon(vertices)
    if len(v) < 2:
        if len(v) == 1:
            _set_point(mask, v[0])
        return mask
    x0, y0 = v[:, 0], v[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)

    r_lo = max(int(np.ceil(v[:, 1].min() - EPS)), 0)
    r_hi = min(int(np.floor(v[:, 1].max() + EPS)), height - 1)
    if r_lo > r_hi:
        return mask

    sloped = np.nonzero(y0 != y1)[0]
    lo = np.minimum(y0, y1)[sloped]
    hi = np.maximum(y0, y1)[sloped]

    # interior spans: an edge crosses row r when lo <= r < hi (half-open), so
    # every row sees an even number of crossings
    e, r = _edge_rows(sloped, np.ceil(lo), np.ceil(hi) - 1, r_lo, r_hi)
    if len(e):
        xc = _x_at(x0, y0, x1, y1, e, r)
        order = np.lexsort((xc, r))
        r, xc = r[order], xc[order]
        c0 = np.ceil(xc[0::2] - EPS)
        c1 = np.floor(xc[1::2] + EPS)
        _accumulate_spans(mask, r[0::2].astype(np.int64), c0, c1, width)

    # boundary pixels on sloped edges
    e, r = _edge_rows(sloped, np.ceil(lo - EPS), np.floor(hi + EPS), r_lo, r_hi)
    if len(e):
        xs = _x_at(x0, y0, x1, y1, e, r)
        xr = np.round(xs)
        hit = np.abs(xs - xr) <= EPS
        cc = xr[hit].astype(np.int64)
        rr = r[hit].astype(np.int64)
        ok = (cc >= 0) & (cc < width)
        mask[rr[ok], cc[ok]] = True

    # boundary pixels on horizontal edges lying on a pixel row
    flat = (y0 == y1) & (np.abs(y0 - np.round(y0)) <= EPS)
    if flat.any():
        fr = np.round(y0[flat]).astype(np.int64)
        ok = (fr >= 0) & (fr < height)
        c0 = np.ceil(np.minimum(x0[flat], x1[flat]) - EPS)[ok]
        c1 = np.floor(np.maximum(x0[flat], x1[flat]) + EPS)[ok]
        _accumulate_spans(mask, fr[ok], c0, c1, width)
    return mask


def fill_polygons(polygons, width: int, height: int) -> np.ndarray:
    mask = np.zeros((height, width), dtype=bool)
    for poly in polygons:
        fill_polygon(poly, width, height, out=mask)
    return mask


def _edge_rows(edges, first, last, r_lo, r_hi):
    """Flattened ``(edge, row)`` pairs for integer rows ``first..last`` of each edge, clipped."""
    first = np.maximum(first, r_lo)
    last = np.minimum(last, r_hi)
    counts = np.maximum(last - first + 1, 0).astype(np.int64)
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    e = np.repeat(edges, counts)
    starts = np.repeat(first, counts)
    offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    return e, starts + offsets


def _x_at(x0, y0, x1, y1, e, r):
    return x0[e] + (r - y0[e]) * (x1[e] - x0[e]) / (y1[e] - y0[e])


def _accumulate_spans(mask, rows, c0, c1, width):
    c0 = np.clip(c0, 0, width).astype(np.int64)
    c1 = np.clip(c1, -1, width - 1).astype(np.int64)
    keep = c1 >= c0
    if not keep.any():
        return
    rows, c0, c1 = np.asarray(rows)[keep], c0[keep], c1[keep]
    # work inside the bounding box of the spans only
    r0, r1 = int(rows.min()), int(rows.max())
    x0, x1 = int(c0.min()), int(c1.max())
    diff = np.zeros((r1 - r0 + 1, x1 - x0 + 2), dtype=np.int32)
    np.add.at(diff, (rows - r0, c0 - x0), 1)
    np.add.at(diff, (rows - r0, c1 + 1 - x0), -1)
    mask[r0 : r1 + 1, x0 : x1 + 1] |= np.cumsum(diff[:, :-1], axis=1) > 0


def _set_point(mask, p):
    c, r = np.round(p).astype(int)
    if abs(p[0] - c) <= EPS and abs(p[1] - r) <= EPS and 0 <= r < mask.shape[0] and 0 <= c < mask.shape[1]:
        mask[r, c] = True
