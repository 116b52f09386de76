"""Input checks shared by the estimator wrappers and the CLI."""

from __future__ import annotations

import numpy as np

from .geom import Intrinsics, Pose
from .skeleton import NUM_KEYPOINTS
from .targets import OutputTensors


def check_intrinsics(K) -> Intrinsics:
    """Accept an :class:`Intrinsics`, a 3x3 camera matrix or ``(fx, fy, cx, cy)``."""
    if isinstance(K, Intrinsics):
        return K
    a = np.asarray(K, dtype=np.float64)
    if a.shape == (3, 3):
        return Intrinsics(a[0, 0], a[1, 1], a[0, 2], a[1, 2])
    if a.shape == (4,):
        return Intrinsics(*a)
    raise ValueError(f"intrinsics must be Intrinsics, a 3x3 matrix or 4 values, got shape {a.shape}")


def check_tensor_batch(X) -> list:
    """A list of :class:`OutputTensors` from tensors, stacked arrays or a batch array."""
    if isinstance(X, OutputTensors):
        return [X]
    if isinstance(X, np.ndarray):
        if X.ndim == 3:
            return [OutputTensors.from_stacked(X)]
        if X.ndim == 4:
            return [OutputTensors.from_stacked(x) for x in X]
        raise ValueError(f"expected a (24, h, w) or (n, 24, h, w) array, got shape {X.shape}")
    return [x if isinstance(x, OutputTensors) else OutputTensors.from_stacked(np.asarray(x)) for x in X]


def check_keypoint_batch(X) -> np.ndarray:
    """``(n, 8, 2)`` float array; NaN marks missing keypoints."""
    a = np.asarray(X, dtype=np.float64)
    if a.shape == (NUM_KEYPOINTS, 2):
        a = a[None]
    if a.ndim != 3 or a.shape[1:] != (NUM_KEYPOINTS, 2):
        raise ValueError(f"expected keypoints of shape (n, {NUM_KEYPOINTS}, 2), got {a.shape}")
    if np.isinf(a).any():
        raise ValueError("keypoints must be finite or NaN")
    return a


def check_pose_sequence(X) -> list:
    poses = list(X)
    for i, p in enumerate(poses):
        if not isinstance(p, Pose):
            raise TypeError(f"item {i} is {type(p).__name__}, expected Pose")
    return poses


def check_mask(m, name="mask") -> np.ndarray:
    a = np.asarray(m)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2D, got shape {a.shape}")
    return a > 0 if a.dtype != bool else a
