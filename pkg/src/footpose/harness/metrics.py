"""Sequence-level error and smoothness metrics."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..geom import Intrinsics, Pose
from ..pnp import FootModel, pose_error, project_model_keypoints


def jitter_metric(poses: Sequence[Pose], model: FootModel, K: Intrinsics) -> float:
    """Mean frame-to-frame keypoint motion in pixels per frame.

    Each step contributes the mean L2 displacement of the 8 projected model
    keypoints between consecutive poses.
    """
    poses = list(poses)
    if len(poses) < 2:
        raise ValueError("jitter needs at least two poses")
    proj = np.stack([project_model_keypoints(model, p, K) for p in poses])
    step = np.linalg.norm(np.diff(proj, axis=0), axis=2)
    return float(step.mean())


def mean_pose_error(estimates: Sequence[Pose], truths: Sequence[Pose]):
    """Mean ``(Euler error deg, translation error cm)`` over paired poses; NaN if none."""
    errs = [pose_error(e, t) for e, t in zip(estimates, truths)]
    if not errs:
        return float("nan"), float("nan")
    a = np.asarray(errs)
    return float(a[:, 0].mean()), float(a[:, 1].mean())
