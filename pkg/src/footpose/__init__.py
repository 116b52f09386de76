"""Foot pose estimation, stabilization and occlusion for virtual shoe try-on.

The package covers everything after the network: decoding keypoint
heatmaps and affinity fields into feet, PnP pose recovery, flow-assisted
pose smoothing and the 2D occlusion region for the shoe opening, plus a
simulator and command line to run it all end to end.
"""

from __future__ import annotations

from .decode import decode, extract_peaks, group_keypoints
from .estimators import KeypointDecoder, OcclusionMasker, PnPPoseEstimator, PoseStabilizer
from .geom import Intrinsics, Pose
from .occlude import occlusion_mask
from .pnp import FootModel, load_default_foot_model, pose_error, solve_pnp
from .stabilize import StabilizerConfig, stabilize
from .targets import OutputTensors, encode

__version__ = "0.1.0"

__all__ = [
    "FootModel",
    "Intrinsics",
    "KeypointDecoder",
    "OcclusionMasker",
    "OutputTensors",
    "PnPPoseEstimator",
    "Pose",
    "PoseStabilizer",
    "StabilizerConfig",
    "decode",
    "encode",
    "extract_peaks",
    "group_keypoints",
    "load_default_foot_model",
    "occlusion_mask",
    "pose_error",
    "solve_pnp",
    "stabilize",
]
