"""scikit-learn style wrappers around the pipeline stages.

Each wrapper keeps its settings as constructor parameters (so
``get_params``/``set_params``/``clone`` work) and delegates to the
module-level functions.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .decode import DEFAULT_MIN_SCORE, DEFAULT_N_SAMPLES, DEFAULT_NMS_RADIUS, DEFAULT_THRESHOLD, decode
from .exceptions import FootPoseError
from .occlude import occlusion_mask
from .pnp import load_default_foot_model, solve_instance
from .stabilize import ALPHA, BETA, StabilizerConfig, StabilizerState, stabilize
from .track import MatchedPairs
from .validation import check_intrinsics, check_keypoint_batch, check_mask, check_pose_sequence, check_tensor_batch


class KeypointDecoder(BaseEstimator, TransformerMixin):
    """Output tensors to grouped foot instances. Stateless; ``fit`` is a no-op."""

    def __init__(self, threshold=DEFAULT_THRESHOLD, nms_radius=DEFAULT_NMS_RADIUS, min_score=DEFAULT_MIN_SCORE, n_samples=DEFAULT_N_SAMPLES):
        self.threshold = threshold
        self.nms_radius = nms_radius
        self.min_score = min_score
        self.n_samples = n_samples

    def fit(self, X=None, y=None):
        self.fitted_ = True
        return self

    def transform(self, X):
        """List (per frame) of lists of :class:`~footpose.skeleton.FootInstance`."""
        return [
            decode(t, threshold=self.threshold, nms_radius=self.nms_radius, min_score=self.min_score, n_samples=self.n_samples)
            for t in check_tensor_batch(X)
        ]


class PnPPoseEstimator(BaseEstimator):
    """Keypoints to 6-DoF poses with a fixed foot model and camera.

    Parameters
    ----------
    intrinsics : Intrinsics or array-like
        ``(fx, fy, cx, cy)`` or a 3x3 matrix.
    model : FootModel, optional
        Defaults to the bundled foot model at ``fit`` time.
    """

    def __init__(self, intrinsics=(280.0, 280.0, 128.0, 128.0), model=None, max_iter=50, damping=1e-3):
        self.intrinsics = intrinsics
        self.model = model
        self.max_iter = max_iter
        self.damping = damping

    def fit(self, X=None, y=None):
        self.K_ = check_intrinsics(self.intrinsics)
        self.model_ = load_default_foot_model() if self.model is None else self.model
        return self

    def predict(self, X):
        """One pose per keypoint set; ``None`` where PnP failed (see ``failures_``)."""
        check_is_fitted(self, "model_")
        poses, self.failures_ = [], []
        for i, kp in enumerate(check_keypoint_batch(X)):
            try:
                poses.append(solve_instance(kp, self.model_, self.K_, max_iter=self.max_iter, damping=self.damping).pose)
            except FootPoseError as exc:
                poses.append(None)
                self.failures_.append((i, exc))
        return poses


class PoseStabilizer(BaseEstimator, TransformerMixin):
    """Streaming pose filter. ``fit`` resets the stream; ``update`` advances it one frame."""

    def __init__(
        self,
        intrinsics=(280.0, 280.0, 128.0, 128.0),
        model=None,
        alpha=ALPHA,
        beta=BETA,
        d_floor=1e-3,
        weight_clamp=True,
        prev_pose_source="refined",
        translation_prediction="propagate_prev",
        divergence_unit="pixels",
    ):
        self.intrinsics = intrinsics
        self.model = model
        self.alpha = alpha
        self.beta = beta
        self.d_floor = d_floor
        self.weight_clamp = weight_clamp
        self.prev_pose_source = prev_pose_source
        self.translation_prediction = translation_prediction
        self.divergence_unit = divergence_unit

    def fit(self, X=None, y=None):
        self.K_ = check_intrinsics(self.intrinsics)
        self.cloud_ = (load_default_foot_model() if self.model is None else self.model).cloud
        self.config_ = StabilizerConfig(
            self.alpha, self.beta, self.d_floor, self.weight_clamp, self.prev_pose_source, self.translation_prediction, self.divergence_unit
        )
        self.state_ = StabilizerState()
        return self

    def update(self, pose, pairs=None):
        check_is_fitted(self, "state_")
        refined, self.state_ = stabilize(self.state_, pose, pairs if pairs is not None else MatchedPairs.empty(), self.cloud_, self.K_, self.config_)
        return refined

    def transform(self, X, pairs=None):
        """Filter a whole sequence from a fresh state. ``pairs[i]`` links frame ``i - 1`` to ``i``."""
        poses = check_pose_sequence(X)
        pairs = [None] * len(poses) if pairs is None else list(pairs)
        if len(pairs) != len(poses):
            raise ValueError("need one pair set per pose")
        self.fit()
        return [self.update(p, m) for p, m in zip(poses, pairs)]


class OcclusionMasker(BaseEstimator, TransformerMixin):
    """``(shoe_mask, leg_mask)`` pairs to occlusion masks (empty when the leg misses the shoe)."""

    def fit(self, X=None, y=None):
        self.fitted_ = True
        return self

    def transform(self, X):
        return np.stack([occlusion_mask(check_mask(s, "shoe mask"), check_mask(l, "leg mask")) for s, l in X])
