"""Seeded synthetic scenes shared by the test modules."""

from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation

from footpose.geom import Intrinsics, Pose, project_points, transform_points
from footpose.skeleton import FootInstance

# a camera in tensor pixels: a 0.26 m foot at 0.7 m spans about 26 px
TENSOR_K = Intrinsics(70.0, 70.0, 32.0, 32.0)


def random_frontal_pose(rng, max_angle_deg=60.0, depth=(0.5, 2.0)) -> Pose:
    """Foot facing the camera (model z toward it), tilted by at most ``max_angle_deg``."""
    frontal = Rotation.from_matrix(np.diag([1.0, -1.0, -1.0]))
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = np.radians(rng.uniform(0.0, max_angle_deg))
    R = (Rotation.from_rotvec(axis * angle) * frontal).as_matrix()
    z = rng.uniform(*depth)
    xy = rng.uniform(-0.1, 0.1, 2) * z
    return Pose.from_matrix(R, [xy[0], xy[1], z])


def foot_keypoints(model, rng, center, yaw, depth=0.7, tilt_deg=30.0, K=TENSOR_K):
    """Projected model keypoints of one foot, yawed in the image and centered near ``center``."""
    R = (
        Rotation.from_euler("z", yaw)
        * Rotation.from_euler("x", rng.uniform(-tilt_deg, tilt_deg), degrees=True)
        * Rotation.from_matrix(np.diag([1.0, -1.0, -1.0]))
    ).as_matrix()
    pose = Pose.from_matrix(R, [0.0, 0.0, depth])
    kp = project_points(transform_points(model.keypoints3d, pose), K)
    return kp - kp.mean(axis=0) + np.asarray(center, dtype=np.float64)


def two_foot_scene(model, rng, min_gap=20.0, noise=1.0, margin=6.0, size=64):
    """Two noisy feet whose closest keypoints are at least ``min_gap`` pixels apart."""
    while True:
        feet = [
            foot_keypoints(model, rng, rng.uniform(margin + 8, size - margin - 8, 2), rng.uniform(-np.pi, np.pi))
            for _ in range(2)
        ]
        feet = [f + rng.normal(0.0, noise, f.shape) for f in feet]
        inside = all(((f >= margin) & (f <= size - 1 - margin)).all() for f in feet)
        gap = np.linalg.norm(feet[0][:, None] - feet[1][None], axis=2).min()
        if inside and gap >= min_gap:
            return [FootInstance(f) for f in feet]


def spread_keypoints(rng, min_sep=12.0, margin=6.0, size=64):
    """Eight points with pairwise distance at least ``min_sep`` (rejection sampled)."""
    while True:
        pts = []
        for _ in range(2000):
            p = rng.uniform(margin, size - 1 - margin, 2)
            if all(np.linalg.norm(p - q) >= min_sep for q in pts):
                pts.append(p)
                if len(pts) == 8:
                    return np.array(pts)


def occlusion_scene(seed, size=64):
    """Shoe band (concentric rectangles or ellipses) and a leg strip at a seeded angle.

    The strip starts outside the frame and ends inside the opening, so it
    crosses the outer silhouette once.
    """
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    cx, cy = rng.uniform(28, 36, 2)
    outer = rng.uniform(18, 26, 2)
    inner = outer * rng.uniform(0.45, 0.7, 2)
    if seed % 2 == 0:
        shoe = (np.abs(xs - cx) <= outer[0]) & (np.abs(ys - cy) <= outer[1])
        hole = (np.abs(xs - cx) <= inner[0]) & (np.abs(ys - cy) <= inner[1])
    else:
        shoe = ((xs - cx) / outer[0]) ** 2 + ((ys - cy) / outer[1]) ** 2 <= 1
        hole = ((xs - cx) / inner[0]) ** 2 + ((ys - cy) / inner[1]) ** 2 <= 1
    shoe &= ~hole
    angle = rng.uniform(-np.pi / 3, np.pi / 3)
    direction = np.array([np.sin(angle), -np.cos(angle)])  # from the center outward, mostly upward
    half_width = rng.uniform(3, 7)
    rel = np.stack([xs - cx, ys - cy], axis=-1)
    along = rel @ direction
    across = rel @ np.array([-direction[1], direction[0]])
    leg = (np.abs(across) <= half_width) & (along >= 0.5 * min(inner))
    return shoe, leg
