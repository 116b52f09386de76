"""Flow-assisted pose stabilization.

Each frame, the mean corner displacement is lifted to a camera-frame
translation at constant depth, giving a motion prediction. The measured
pose is blended with that prediction using a weight that grows with the
log of the pixel divergence between the two poses' projections of the
shoe point cloud: small divergence holds the previous pose, large
divergence follows the measurement.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import DegenerateBlendError, InvalidDepthError, NoMatchesError
from .geom import Intrinsics, Pose, as_points, project_points
from .track import MatchedPairs

ALPHA = 0.432
BETA = 2.388

PREV_SOURCES = ("refined", "raw")
TRANSLATION_MODES = ("propagate_prev", "add_to_measured")
# interface spelling accepted for the add-to-measured mode
_MODE_ALIASES = {"literal_eq5": "add_to_measured"}
DIVERGENCE_UNITS = ("pixels", "normalized")


@dataclass(frozen=True)
class StabilizerConfig:
    """Filter constants and mode switches.

    ``divergence_unit="normalized"`` divides the pixel divergence by the
    mean focal length before the weight law is applied; the default keeps
    pixels.
    """

    alpha: float = ALPHA
    beta: float = BETA
    d_floor: float = 1e-3
    weight_clamp: bool = True
    prev_pose_source: str = "refined"
    translation_prediction: str = "propagate_prev"
    divergence_unit: str = "pixels"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.d_floor > 0:
            raise ValueError("d_floor must be positive")
        if self.prev_pose_source not in PREV_SOURCES:
            raise ValueError(f"prev_pose_source must be one of {PREV_SOURCES}")
        object.__setattr__(self, "translation_prediction", _MODE_ALIASES.get(self.translation_prediction, self.translation_prediction))
        if self.translation_prediction not in TRANSLATION_MODES:
            raise ValueError(f"translation_prediction must be one of {TRANSLATION_MODES}")
        if self.divergence_unit not in DIVERGENCE_UNITS:
            raise ValueError(f"divergence_unit must be one of {DIVERGENCE_UNITS}")


@dataclass(frozen=True)
class StabilizerState:
    prev_pose: Pose = None
    initialized: bool = False


def mean_displacement(pairs: MatchedPairs) -> np.ndarray:
    """Average corner motion ``mean(cur - prev)`` in pixels."""
    if len(pairs) == 0:
        raise NoMatchesError("no matched corner pairs")
    return (pairs.cur - pairs.prev).mean(axis=0)


def lift_displacement(v_pix, t_z: float, K: Intrinsics) -> np.ndarray:
    """Pixel displacement to a camera-frame displacement at depth ``t_z`` (z stays 0)."""
    if not t_z > 0:
        raise InvalidDepthError(f"depth must be positive, got {t_z}")
    return np.array([v_pix[0] * t_z / K.fx, v_pix[1] * t_z / K.fy, 0.0])


def predict_translation(prev_translation, v_cam, cur_translation=None, mode: str = "propagate_prev") -> np.ndarray:
    """Flow-predicted translation with the depth held at the previous value.

    ``add_to_measured`` (alias ``literal_eq5``) adds the flow to the current
    measured x, y instead of the previous ones (``cur_translation`` is
    required then).
    """
    prev = np.asarray(prev_translation, dtype=np.float64)
    mode = _MODE_ALIASES.get(mode, mode)
    if mode == "propagate_prev":
        base = prev
    elif mode == "add_to_measured":
        if cur_translation is None:
            raise ValueError("add_to_measured needs the current measured translation")
        base = np.asarray(cur_translation, dtype=np.float64)
    else:
        raise ValueError(f"unknown translation prediction mode {mode!r}")
    return np.array([base[0] + v_cam[0], base[1] + v_cam[1], prev[2]])


def divergence(cloud, R_prev, T_pred, R_cur, T_cur, K: Intrinsics) -> float:
    """Mean per-point L1 pixel distance between the cloud projected under
    ``[R_prev | T_pred]`` and under ``[R_cur | T_cur]``."""
    pts = as_points(cloud)
    if len(pts) == 0:
        raise ValueError("point cloud is empty")
    c1 = project_points(pts @ np.asarray(R_prev).T + np.asarray(T_pred), K, which="predicted pose")
    c2 = project_points(pts @ np.asarray(R_cur).T + np.asarray(T_cur), K, which="measured pose")
    return float(np.abs(c1 - c2).sum(axis=1).mean())


def rotation_weight(D: float, cfg: StabilizerConfig = StabilizerConfig()) -> float:
    """``alpha * ln(max(D, d_floor)) + beta``, clamped to [0, 1] unless disabled."""
    w = cfg.alpha * np.log(max(D, cfg.d_floor)) + cfg.beta
    if cfg.weight_clamp:
        w = min(max(w, 0.0), 1.0)
    return float(w)


def translation_weight(w_R: float) -> float:
    return w_R * w_R


def blend_rotation(q_prev, q_cur, w_R: float) -> np.ndarray:
    """Normalized linear blend ``w_R q_cur + (1 - w_R) q_prev`` on the same hemisphere.

    The endpoints ``w_R = 1`` and ``w_R = 0`` return the inputs unchanged.
    """
    q_prev = np.asarray(q_prev, dtype=np.float64)
    q_cur = np.asarray(q_cur, dtype=np.float64)
    if w_R == 1.0:
        return q_cur.copy()
    if w_R == 0.0:
        return q_prev.copy()
    if np.dot(q_prev, q_cur) < 0:
        q_cur = -q_cur
    q = w_R * q_cur + (1.0 - w_R) * q_prev
    n = np.linalg.norm(q)
    if n < 1e-9:
        raise DegenerateBlendError("quaternion blend collapsed to zero")
    return q / n


def blend_translation(T_cur, T_pred, w_T: float) -> np.ndarray:
    T_cur = np.asarray(T_cur, dtype=np.float64)
    T_pred = np.asarray(T_pred, dtype=np.float64)
    if w_T == 1.0:
        return T_cur.copy()
    if w_T == 0.0:
        return T_pred.copy()
    return w_T * T_cur + (1.0 - w_T) * T_pred


@dataclass(frozen=True)
class StepInfo:
    """Intermediate quantities of one stabilizer step, for diagnostics."""

    v_pix: np.ndarray = None
    t_pred: np.ndarray = None
    divergence: float = float("nan")
    w_R: float = 1.0
    w_T: float = 1.0
    passthrough: bool = False


def stabilize(
    state: StabilizerState,
    measured: Pose,
    pairs: MatchedPairs,
    cloud,
    K: Intrinsics,
    cfg: StabilizerConfig = StabilizerConfig(),
    return_info: bool = False,
):
    """One filter step. Returns ``(refined, new_state)`` (plus :class:`StepInfo`).

    The first frame and frames without matches pass the measurement through.
    """
    if not state.initialized:
        out = (measured, StabilizerState(measured, True))
        return out + (StepInfo(passthrough=True),) if return_info else out

    prev = state.prev_pose
    try:
        v_pix = mean_displacement(pairs)
    except NoMatchesError:
        out = (measured, StabilizerState(measured, True))
        return out + (StepInfo(passthrough=True),) if return_info else out

    v_cam = lift_displacement(v_pix, prev.translation[2], K)
    t_pred = predict_translation(prev.translation, v_cam, measured.translation, cfg.translation_prediction)
    D = divergence(cloud, prev.matrix, t_pred, measured.matrix, measured.translation, K)
    D_w = D / (0.5 * (K.fx + K.fy)) if cfg.divergence_unit == "normalized" else D
    w_R = rotation_weight(D_w, cfg)
    w_T = translation_weight(w_R)

    if w_R == 1.0 and w_T == 1.0:
        refined = measured
    else:
        q = blend_rotation(prev.rotation, measured.rotation, w_R)
        refined = Pose(q, blend_translation(measured.translation, t_pred, w_T))
    new_prev = refined if cfg.prev_pose_source == "refined" else measured
    out = (refined, StabilizerState(new_prev, True))
    if return_info:
        return out + (StepInfo(v_pix, t_pred, D, w_R, w_T, refined is measured),)
    return out


def stabilize_sequence(measured_poses, pairs_seq, cloud, K: Intrinsics, cfg: StabilizerConfig = StabilizerConfig()):
    """Run the filter over a whole stream; ``pairs_seq[i]`` links frame ``i - 1`` to ``i``."""
    state = StabilizerState()
    refined = []
    for pose, pairs in zip(measured_poses, pairs_seq):
        out, state = stabilize(state, pose, pairs if pairs is not None else MatchedPairs.empty(), cloud, K, cfg)
        refined.append(out)
    return refined


def config_from_dict(d) -> StabilizerConfig:
    """Build a config from the harness's JSON keys (``clamp`` aliases ``weight_clamp``)."""
    d = dict(d or {})
    if "clamp" in d:
        d["weight_clamp"] = d.pop("clamp")
    known = {f for f in StabilizerConfig.__dataclass_fields__}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown stabilizer config keys: {sorted(unknown)}")
    return replace(StabilizerConfig(), **d)
