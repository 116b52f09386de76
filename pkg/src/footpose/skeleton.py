"""Foot keypoint layout and per-foot keypoint containers.

Keypoint indices: 1 toe, 0 and 2 heel, 3-6 the sides of the foot
(3/5 on one side, 4/6 on the other), 7 the center of the instep.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

NUM_KEYPOINTS = 8
NUM_EDGES = 7

DEFAULT_EDGES: Tuple[Tuple[int, int], ...] = (
    (1, 3),
    (1, 4),
    (3, 5),
    (4, 6),
    (5, 0),
    (6, 2),
    (7, 1),
)


@dataclass(frozen=True)
class Skeleton:
    """Ordered keypoint connections; edge ``e`` owns PAF channels ``2e`` and ``2e + 1``."""

    edges: Tuple[Tuple[int, int], ...] = DEFAULT_EDGES

    def __post_init__(self):
        edges = tuple((int(a), int(b)) for a, b in self.edges)
        object.__setattr__(self, "edges", edges)
        if len(edges) != NUM_EDGES:
            raise ValueError(f"skeleton needs exactly {NUM_EDGES} edges, got {len(edges)}")
        for a, b in edges:
            if not (0 <= a < NUM_KEYPOINTS and 0 <= b < NUM_KEYPOINTS) or a == b:
                raise ValueError(f"invalid edge ({a}, {b})")
        if not self.is_connected():
            raise ValueError("skeleton edges must connect all keypoints")

    def is_connected(self) -> bool:
        parent = list(range(NUM_KEYPOINTS))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for a, b in self.edges:
            parent[find(a)] = find(b)
        return len({find(i) for i in range(NUM_KEYPOINTS)}) == 1

    def __len__(self):
        return len(self.edges)

    def __iter__(self):
        return iter(self.edges)


DEFAULT_SKELETON = Skeleton()


@dataclass(frozen=True)
class FootInstance:
    """One foot's keypoints; missing keypoints are NaN rows.

    Parameters
    ----------
    keypoints : array-like, shape (8, 2)
        ``(x, y)`` per keypoint, in whatever coordinate frame the caller states.
    confidences : array-like, shape (8,), optional
        Heatmap score per keypoint, NaN where missing. Defaults to 1 for
        present keypoints.
    """

    keypoints: np.ndarray
    confidences: np.ndarray = field(default=None)
    candidate_ids: Tuple[int, ...] = ()

    def __post_init__(self):
        kp = np.array(self.keypoints, dtype=np.float64).reshape(NUM_KEYPOINTS, 2)
        present = np.all(np.isfinite(kp), axis=1)
        kp[~present] = np.nan
        if self.confidences is None:
            conf = np.where(present, 1.0, np.nan)
        else:
            conf = np.array(self.confidences, dtype=np.float64).reshape(NUM_KEYPOINTS)
            conf[~present] = np.nan
        kp.setflags(write=False)
        conf.setflags(write=False)
        object.__setattr__(self, "keypoints", kp)
        object.__setattr__(self, "confidences", conf)

    @property
    def present(self) -> np.ndarray:
        return np.isfinite(self.keypoints[:, 0])

    @property
    def completeness(self) -> int:
        return int(self.present.sum())

    @property
    def is_full(self) -> bool:
        return self.completeness == NUM_KEYPOINTS

    @property
    def mean_confidence(self) -> float:
        c = self.confidences[self.present]
        return float(c.mean()) if len(c) else 0.0

    def scaled(self, factor: float) -> "FootInstance":
        return FootInstance(self.keypoints * factor, self.confidences, self.candidate_ids)


def as_instance(obj) -> FootInstance:
    if isinstance(obj, FootInstance):
        return obj
    return FootInstance(np.asarray(obj, dtype=np.float64))


def as_instances(objs: Sequence) -> list:
    return [as_instance(o) for o in objs]
