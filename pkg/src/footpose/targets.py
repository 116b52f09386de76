"""Encode foot annotations into the network's output tensor layout.

The keypoint branch emits 8 heatmaps, the PAF branch 14 channels (x and y
component for each of the 7 skeleton edges) and the segmentation branch
2 channels (leg, foot), all on a 64x64 grid. The simulator uses these
encoders in place of network inference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import check_simple, fill_polygon
from .skeleton import DEFAULT_SKELETON, NUM_EDGES, NUM_KEYPOINTS, Skeleton, as_instances

GRID_SIZE = 64
DEFAULT_SIGMA = 2.0
DEFAULT_PAF_HALF_WIDTH = 1.0
LEG, FOOT = 0, 1


@dataclass(frozen=True)
class OutputTensors:
    """Heatmap ``(8, H, W)``, PAF ``(14, H, W)`` and segmentation ``(2, H, W)`` grids."""

    heatmap: np.ndarray
    pafmap: np.ndarray
    segmap: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.heatmap, dtype=np.float64)
        p = np.asarray(self.pafmap, dtype=np.float64)
        s = np.asarray(self.segmap, dtype=np.float64)
        if h.ndim != 3 or h.shape[0] != NUM_KEYPOINTS:
            raise ValueError(f"heatmap must be ({NUM_KEYPOINTS}, H, W), got {h.shape}")
        if p.shape != (2 * NUM_EDGES,) + h.shape[1:]:
            raise ValueError(f"pafmap must be ({2 * NUM_EDGES}, H, W), got {p.shape}")
        if s.shape != (2,) + h.shape[1:]:
            raise ValueError(f"segmap must be (2, H, W), got {s.shape}")
        object.__setattr__(self, "heatmap", h)
        object.__setattr__(self, "pafmap", p)
        object.__setattr__(self, "segmap", s)

    @property
    def shape(self):
        return self.heatmap.shape[1:]

    def stacked(self) -> np.ndarray:
        """All 24 channels in one ``(24, H, W)`` array (heatmap, PAF, segmentation)."""
        return np.concatenate([self.heatmap, self.pafmap, self.segmap], axis=0)

    @classmethod
    def from_stacked(cls, t) -> "OutputTensors":
        t = np.asarray(t)
        if t.ndim != 3 or t.shape[0] != NUM_KEYPOINTS + 2 * NUM_EDGES + 2:
            raise ValueError(f"stacked tensor must have 24 channels, got shape {t.shape}")
        return cls(t[:NUM_KEYPOINTS], t[NUM_KEYPOINTS : NUM_KEYPOINTS + 2 * NUM_EDGES], t[-2:])


def _grid(size):
    h, w = (size, size) if np.isscalar(size) else size
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    return h, w, xs, ys


def encode_heatmaps(instances, sigma: float = DEFAULT_SIGMA, size=GRID_SIZE) -> np.ndarray:
    """Gaussian keypoint heatmaps, max-combined across instances.

    Each channel holds ``exp(-d**2 / (2 sigma**2))`` for the distance ``d``
    from the pixel center to the keypoint; missing keypoints contribute nothing.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    h, w, xs, ys = _grid(size)
    out = np.zeros((NUM_KEYPOINTS, h, w))
    for inst in as_instances(instances):
        for k, (x, y) in enumerate(inst.keypoints):
            if not np.isfinite(x):
                continue
            g = np.exp(-((xs - x) ** 2 + (ys - y) ** 2) / (2.0 * sigma**2))
            np.maximum(out[k], g, out=out[k])
    return out


def encode_pafs(
    instances,
    skeleton: Skeleton = DEFAULT_SKELETON,
    half_width: float = DEFAULT_PAF_HALF_WIDTH,
    size=GRID_SIZE,
    return_diagnostics: bool = False,
):
    """Part affinity fields: the unit limb direction on a band around each limb.

    Pixels within ``half_width`` of segment ``k_a -> k_b`` store its unit
    vector (x in channel ``2e``, y in ``2e + 1``); overlapping limbs from
    different instances are averaged.

    Returns the ``(14, H, W)`` field, plus a list of skipped
    ``(instance, edge)`` pairs with coincident endpoints when
    ``return_diagnostics`` is set.
    """
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    h, w, xs, ys = _grid(size)
    acc = np.zeros((2 * NUM_EDGES, h, w))
    count = np.zeros((NUM_EDGES, h, w))
    degenerate = []
    for i, inst in enumerate(as_instances(instances)):
        for e, (a, b) in enumerate(skeleton.edges):
            pa, pb = inst.keypoints[a], inst.keypoints[b]
            if not (np.all(np.isfinite(pa)) and np.all(np.isfinite(pb))):
                continue
            d = pb - pa
            length = float(np.hypot(*d))
            if length < 1e-9:
                degenerate.append((i, e))
                continue
            u = d / length
            along = np.clip((xs - pa[0]) * u[0] + (ys - pa[1]) * u[1], 0.0, length)
            dist = np.hypot(xs - (pa[0] + along * u[0]), ys - (pa[1] + along * u[1]))
            band = dist <= half_width
            acc[2 * e][band] += u[0]
            acc[2 * e + 1][band] += u[1]
            count[e][band] += 1
    n = np.repeat(count, 2, axis=0)
    paf = np.divide(acc, n, out=np.zeros_like(acc), where=n > 0)
    if return_diagnostics:
        return paf, degenerate
    return paf


def _polygon_list(polys):
    if polys is None:
        return []
    try:
        arr = np.asarray(polys, dtype=np.float64)
    except ValueError:
        return list(polys)
    if arr.size == 0:
        return []
    if arr.ndim == 2 and arr.shape[1] == 2:
        return [arr]
    return list(arr)


def encode_segmentation(leg_polygons, foot_polygons, size=GRID_SIZE) -> np.ndarray:
    """Leg (channel 0) and foot (channel 1) masks from polygons.

    Either argument may be a single ``(n, 2)`` polygon or a list of them.
    A pixel is set when its center is inside or on a polygon.
    """
    h, w = (size, size) if np.isscalar(size) else size
    out = np.zeros((2, h, w))
    for ch, polys in ((LEG, leg_polygons), (FOOT, foot_polygons)):
        mask = np.zeros((h, w), dtype=bool)
        for poly in _polygon_list(polys):
            check_simple(poly)
            fill_polygon(poly, w, h, out=mask)
        out[ch] = mask
    return out


def encode(
    instances,
    leg_polygons=(),
    foot_polygons=(),
    skeleton: Skeleton = DEFAULT_SKELETON,
    sigma: float = DEFAULT_SIGMA,
    half_width: float = DEFAULT_PAF_HALF_WIDTH,
    size=GRID_SIZE,
) -> OutputTensors:
    return OutputTensors(
        encode_heatmaps(instances, sigma, size),
        encode_pafs(instances, skeleton, half_width, size),
        encode_segmentation(leg_polygons, foot_polygons, size),
    )
