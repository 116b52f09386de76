"""Synthetic two-foot scenes standing in for the camera and the network.

Each foot gets a ground-truth pose per frame. From it the simulator
derives noisy keypoints, the network-style output tensors, corner pairs
that follow the true inter-frame motion, and image-resolution leg and
shoe masks. The random stream is numpy's PCG64, seeded from the config,
so a config always reproduces the same records bit for bit.

Image and tensor coordinates share the pixel-center convention and differ
by the stride ``image_size / tensor_size``: tensor ``x`` is image ``x / stride``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional, Tuple

import numpy as np
from scipy.spatial import ConvexHull

from ..exceptions import BehindCameraError, ConfigError
from ..geom import Intrinsics, Pose, axis_angle_to_quat, project_points, quat_multiply, transform_points
from ..pnp import FootModel, load_default_foot_model
from ..raster import fill_polygon
from ..skeleton import FootInstance
from ..targets import OutputTensors, encode
from ..track import MatchedPairs

MOTIONS = ("static", "sinusoid", "walk")

# shoe opening rim in the model frame: an ellipse over the heel half
OPENING_CENTER = (-0.07, 0.0, 0.065)
OPENING_RADII = (0.045, 0.03)
COLLAR = 1.5
LEG_RADIUS = 0.035
LEG_HEIGHT = 0.3


@dataclass(frozen=True)
class TrajectoryConfig:
    """Everything that defines a synthetic sequence.

    Lengths are meters, angles radians, noise levels image pixels.
    ``tilt`` is the camera's downward viewing angle and ``spacing`` the
    lateral distance between the two feet.
    """

    n_frames: int = 300
    motion: str = "static"
    amplitude_m: float = 0.03
    amplitude_rad: float = 0.0
    period: float = 60.0
    keypoint_noise: float = 2.0
    pair_noise: float = 0.3
    n_pairs: int = 40
    seed: int = 0
    n_feet: int = 2
    fx: float = 280.0
    fy: float = 280.0
    cx: float = 128.0
    cy: float = 128.0
    image_size: int = 256
    tensor_size: int = 64
    depth: float = 0.5
    tilt: float = float(np.radians(35.0))
    spacing: float = 0.14
    fps: float = 30.0

    def __post_init__(self):
        if self.n_frames < 1:
            raise ConfigError("n_frames must be >= 1")
        if self.motion not in MOTIONS:
            raise ConfigError(f"motion must be one of {MOTIONS}, got {self.motion!r}")
        if self.keypoint_noise < 0 or self.pair_noise < 0:
            raise ConfigError("noise levels must be >= 0")
        if self.n_feet not in (1, 2):
            raise ConfigError("n_feet must be 1 or 2")
        if self.image_size % self.tensor_size:
            raise ConfigError("image_size must be a multiple of tensor_size")
        if self.n_pairs < 0 or self.period <= 0 or self.depth <= 0:
            raise ConfigError("n_pairs, period and depth must be positive")
        Intrinsics(self.fx, self.fy, self.cx, self.cy)

    @property
    def intrinsics(self) -> Intrinsics:
        return Intrinsics(self.fx, self.fy, self.cx, self.cy)

    @property
    def stride(self) -> int:
        return self.image_size // self.tensor_size

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "TrajectoryConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class FrameRecord:
    """One simulated frame; per-foot lists are indexed by the true foot id."""

    index: int
    true_poses: List[Pose]
    tensors: OutputTensors
    pairs: List[MatchedPairs]
    leg_mask: np.ndarray
    shoe_masks: List[np.ndarray]
    keypoints: List[np.ndarray] = field(default_factory=list)
    timestamp: float = 0.0


def base_pose(cfg: TrajectoryConfig, foot: int) -> Pose:
    """Standing foot seen from above and behind: toes up the image, leg toward the camera."""
    # model x (toe) -> image up, model z (up) -> toward the camera
    R0 = np.column_stack([[0.0, -1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, -1.0]])
    c, s = np.cos(cfg.tilt), np.sin(cfg.tilt)
    tilt = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    x = 0.0 if cfg.n_feet == 1 else (foot - 0.5) * cfg.spacing
    return Pose.from_matrix(tilt @ R0, [x, 0.0, cfg.depth])


def _compose(pose: Pose, d_t, d_rotvec) -> Pose:
    # model-frame rotation offset, camera-frame translation offset
    q = quat_multiply(pose.rotation, axis_angle_to_quat(d_rotvec))
    return Pose(q, pose.translation + np.asarray(d_t, dtype=np.float64))


def true_pose(cfg: TrajectoryConfig, foot: int, frame: int) -> Pose:
    base = base_pose(cfg, foot)
    phase = 2.0 * np.pi * frame / cfg.period
    if cfg.motion == "static":
        return base
    if cfg.motion == "sinusoid":
        # depth oscillation and a yaw wobble about the foot's up axis
        s = np.sin(phase)
        return _compose(base, [0.0, 0.0, cfg.amplitude_m * s], [0.0, 0.0, cfg.amplitude_rad * s])
    # walk: feet step alternately along the toe direction with a heel lift
    lift = max(0.0, np.sin(phase + np.pi * foot))
    stride = cfg.amplitude_m * (1.0 - np.cos(phase + np.pi * foot)) / 2.0
    toe_dir = base.matrix[:, 0]
    return _compose(base, stride * toe_dir, [0.0, -cfg.amplitude_rad * lift, 0.0])


def _ellipse(center, radii, n=24):
    s = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return np.stack([center[0] + radii[0] * np.cos(s), center[1] + radii[1] * np.sin(s), np.full(n, center[2])], axis=1)


def _hull(points2d) -> np.ndarray:
    return points2d[ConvexHull(points2d).vertices]


def shoe_outline(model: FootModel, pose: Pose, K: Intrinsics) -> Tuple[np.ndarray, np.ndarray]:
    """Projected outer silhouette (convex hull) and opening polygon of the shoe, image pixels."""
    rim = _ellipse(OPENING_CENTER, OPENING_RADII)
    collar = _ellipse(OPENING_CENTER, tuple(COLLAR * r for r in OPENING_RADII))
    outer = project_points(transform_points(np.vstack([model.cloud, collar]), pose), K, which="shoe")
    hole = project_points(transform_points(rim, pose), K, which="shoe opening")
    return _hull(outer), hole


def render_shoe_mask(model: FootModel, pose: Pose, K: Intrinsics, size: int) -> np.ndarray:
    """Binary render of the shoe with a transparent opening."""
    outer, hole = shoe_outline(model, pose, K)
    return fill_polygon(outer, size, size) & ~fill_polygon(hole, size, size)


def leg_outline(pose: Pose, K: Intrinsics) -> np.ndarray:
    """Projected leg: hull of two circles, at the opening and ``LEG_HEIGHT`` above it."""
    lo = _ellipse(OPENING_CENTER, (LEG_RADIUS, LEG_RADIUS), 16)
    hi = lo + np.array([0.0, 0.0, LEG_HEIGHT])
    return _hull(project_points(transform_points(np.vstack([lo, hi]), pose), K, which="leg"))


def _pairs(rng, model, prev_pose, cur_pose, K, cfg) -> MatchedPairs:
    if cfg.n_pairs == 0:
        return MatchedPairs.empty()
    idx = rng.choice(len(model.cloud), size=cfg.n_pairs, replace=len(model.cloud) < cfg.n_pairs)
    pts = model.cloud[idx]
    p0 = project_points(transform_points(pts, prev_pose), K)
    p1 = project_points(transform_points(pts, cur_pose), K)
    p0 = p0 + rng.normal(0.0, cfg.pair_noise, p0.shape) if cfg.pair_noise > 0 else p0
    p1 = p1 + rng.normal(0.0, cfg.pair_noise, p1.shape) if cfg.pair_noise > 0 else p1
    return MatchedPairs(p0, p1)


def simulate_sequence(cfg: TrajectoryConfig, model: Optional[FootModel] = None) -> List[FrameRecord]:
    """Generate ``cfg.n_frames`` frames of synthetic observations.

    Raises
    ------
    ConfigError
        Some geometry lands behind the camera; the message names the frame.
    """
    model = load_default_foot_model() if model is None else model
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    K = cfg.intrinsics
    size, stride = cfg.image_size, cfg.stride
    frames = []
    prev_poses = None
    for l in range(cfg.n_frames):
        poses = [true_pose(cfg, f, l) for f in range(cfg.n_feet)]
        try:
            clean = [project_points(transform_points(model.keypoints3d, p), K) for p in poses]
            shoes = [shoe_outline(model, p, K) for p in poses]
            legs = [leg_outline(p, K) for p in poses]
        except BehindCameraError as exc:
            raise ConfigError(f"frame {l}: {exc}") from exc
        noisy = [kp + rng.normal(0.0, cfg.keypoint_noise, kp.shape) if cfg.keypoint_noise > 0 else kp for kp in clean]
        instances = [FootInstance(kp / stride) for kp in noisy]
        tensors = encode(
            instances,
            leg_polygons=[leg / stride for leg in legs],
            foot_polygons=[outer / stride for outer, _ in shoes],
            size=cfg.tensor_size,
        )
        if prev_poses is None:
            pairs = [MatchedPairs.empty() for _ in poses]
        else:
            pairs = [_pairs(rng, model, a, b, K, cfg) for a, b in zip(prev_poses, poses)]
        leg_mask = np.zeros((size, size), dtype=bool)
        for leg in legs:
            fill_polygon(leg, size, size, out=leg_mask)
        shoe_masks = [fill_polygon(outer, size, size) & ~fill_polygon(hole, size, size) for outer, hole in shoes]
        frames.append(FrameRecord(l, poses, tensors, pairs, leg_mask, shoe_masks, noisy, l / cfg.fps))
        prev_poses = poses
    return frames


__all__ = [
    "TrajectoryConfig",
    "FrameRecord",
    "MOTIONS",
    "base_pose",
    "true_pose",
    "simulate_sequence",
    "render_shoe_mask",
    "shoe_outline",
    "leg_outline",
]
