from __future__ import annotations

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from footpose import KeypointDecoder, OcclusionMasker, PnPPoseEstimator, PoseStabilizer
from footpose.geom import Pose
from footpose.pnp import project_model_keypoints
from footpose.skeleton import FootInstance
from footpose.targets import encode

from scenes import spread_keypoints


def test_decoder_accepts_tensors_and_arrays(rng):
    kp = spread_keypoints(rng)
    t = encode([FootInstance(kp)])
    dec = KeypointDecoder().fit()
    a = dec.transform([t])
    b = dec.transform(t.stacked()[None])
    assert np.array_equal(a[0][0].keypoints, b[0][0].keypoints)
    with pytest.raises(ValueError):
        dec.transform(np.zeros((5, 64, 64)))


def test_pnp_estimator(model, K):
    truth = Pose(translation=[0.01, 0.0, 0.6])
    kp = project_model_keypoints(model, truth, K)
    est = PnPPoseEstimator(intrinsics=(K.fx, K.fy, K.cx, K.cy))
    with pytest.raises(NotFittedError):
        est.predict(kp)
    bad = np.full((8, 2), np.nan)
    poses = est.fit().predict(np.stack([kp, bad]))
    assert np.abs(poses[0].translation - truth.translation).max() < 1e-9
    assert poses[1] is None and est.failures_[0][0] == 1
    with pytest.raises(ValueError):
        est.predict(np.zeros((3, 7, 2)))


def test_stabilizer_estimator_sequence():
    p = Pose(translation=[0.0, 0.0, 0.6])
    stab = PoseStabilizer()
    out = stab.transform([p, p, p])
    assert all(o == p for o in out)
    with pytest.raises(TypeError):
        stab.transform([p, "pose"])
    with pytest.raises(ValueError):
        stab.transform([p], pairs=[None, None])


def test_clone_and_params():
    s = PoseStabilizer(alpha=0.5, divergence_unit="normalized")
    c = clone(s)
    assert c.get_params()["alpha"] == 0.5 and c.get_params()["divergence_unit"] == "normalized"
    assert clone(KeypointDecoder(threshold=0.2)).threshold == 0.2
    assert PnPPoseEstimator().set_params(max_iter=10).max_iter == 10


def test_occlusion_masker():
    shoe = np.zeros((64, 64), dtype=bool)
    shoe[10:55, 10:55] = True
    shoe[20:45, 20:45] = False
    leg = np.zeros_like(shoe)
    leg[0:16, 28:37] = True
    out = OcclusionMasker().fit().transform([(shoe, leg), (shoe, np.zeros_like(leg))])
    assert out.shape == (2, 64, 64) and out[0].sum() == 90 and not out[1].any()
