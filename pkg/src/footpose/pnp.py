"""6-DoF foot pose from 2D-3D keypoint correspondences.

``solve_pnp`` initializes with a direct linear transform and refines
``(quaternion, translation)`` with Levenberg-Marquardt on the pixel
reprojection error.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .exceptions import InsufficientDataError, NonConvergenceError
from .geom import (
    Intrinsics,
    Pose,
    as_points,
    axis_angle_to_quat,
    euler_xyz,
    project_points,
    quat_multiply,
    quat_to_matrix,
    transform_points,
)
from .skeleton import NUM_KEYPOINTS

MIN_CORRESPONDENCES = 6
# LM stops once an accepted step lowers the cost by less than FTOL (relative)
FTOL = 1e-12
XTOL = 1e-14
# initializers whose starting cost exceeds the best one's by this factor are skipped
SEED_COST_RATIO = 1e3
FOOT_LENGTH = 0.26
MODEL_MAGIC = "footmodel v1"


@dataclass(frozen=True)
class FootModel:
    """Canonical foot: 8 keypoints plus a surface point cloud, model frame, meters.

    Model axes: +x heel to toe, +y toward the foot's left side, +z up.
    """

    keypoints3d: np.ndarray
    cloud: np.ndarray
    scale_length: float = FOOT_LENGTH

    def __post_init__(self):
        kp = as_points(self.keypoints3d).copy()
        cloud = as_points(self.cloud).copy()
        if kp.shape[0] != NUM_KEYPOINTS:
            raise ValueError(f"foot model needs {NUM_KEYPOINTS} keypoints, got {kp.shape[0]}")
        if cloud.shape[0] == 0:
            raise ValueError("foot model point cloud is empty")
        sv = np.linalg.svd(kp - kp.mean(axis=0), compute_uv=False)
        if sv[-1] < 1e-6 * sv[0]:
            raise ValueError("foot model keypoints are (nearly) coplanar")
        kp.setflags(write=False)
        cloud.setflags(write=False)
        object.__setattr__(self, "keypoints3d", kp)
        object.__setattr__(self, "cloud", cloud)

    def save(self, path) -> None:
        lines = [MODEL_MAGIC, f"{len(self.keypoints3d)} {len(self.cloud)}"]
        lines += [" ".join(repr(float(c)) for c in p) for p in self.keypoints3d]
        lines += [" ".join(repr(float(c)) for c in p) for p in self.cloud]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "FootModel":
        return cls.parse(Path(path).read_text())

    @classmethod
    def parse(cls, text: str) -> "FootModel":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != MODEL_MAGIC:
            raise ValueError(f"not a foot model file (expected header {MODEL_MAGIC!r})")
        try:
            n_kp, n_cloud = (int(t) for t in lines[1].split())
            pts = np.array([[float(t) for t in ln.split()] for ln in lines[2:]])
        except (IndexError, ValueError) as exc:
            raise ValueError(f"malformed foot model file: {exc}") from exc
        if pts.shape != (n_kp + n_cloud, 3):
            raise ValueError(f"expected {n_kp + n_cloud} points of 3 coordinates, got {pts.shape}")
        kp = pts[:n_kp]
        return cls(kp, pts[n_kp:], float(kp[:, 0].max() - kp[:, 0].min()))


def make_default_foot_model(n_outline: int = 24, n_levels: int = 4) -> FootModel:
    """Analytic foot: a tapered outline swept over a few heights, capped on top."""
    kp = np.array(
        [
            [-0.130, 0.030, 0.030],  # 0 heel, left
            [0.130, 0.000, 0.020],  # 1 toe
            [-0.130, -0.030, 0.030],  # 2 heel, right
            [0.060, 0.048, 0.020],  # 3 left side, ball
            [0.060, -0.045, 0.020],  # 4 right side, ball
            [-0.040, 0.040, 0.025],  # 5 left side, arch
            [-0.040, -0.040, 0.025],  # 6 right side, arch
            [0.000, 0.000, 0.070],  # 7 instep
        ]
    )
    s = np.linspace(0.0, 2.0 * np.pi, n_outline, endpoint=False)
    x = 0.13 * np.cos(s)
    # wider at the ball (x > 0) than at the heel
    y = np.sin(s) * (0.035 + 0.015 * (1 + np.cos(s)) / 2)
    pts = []
    for k, z in enumerate(np.linspace(0.0, 0.06, n_levels)):
        shrink = 1.0 - 0.35 * (k / max(n_levels - 1, 1)) ** 2
        pts.append(np.stack([x * shrink, y * shrink, np.full_like(x, z)], axis=1))
    pts.append(kp[[1, 7]])
    return FootModel(kp, np.concatenate(pts), FOOT_LENGTH)


def load_default_foot_model() -> FootModel:
    """The foot model shipped in ``footpose/data/foot_model.txt``."""
    text = resources.files("footpose").joinpath("data/foot_model.txt").read_text()
    return FootModel.parse(text)


class PnPResult(NamedTuple):
    pose: Pose
    residual: float
    iterations: int


def reprojection_errors(points3d, points2d, pose: Pose, K: Intrinsics) -> np.ndarray:
    proj = project_points(transform_points(points3d, pose), K)
    return np.linalg.norm(proj - as_points(points2d, 2), axis=1)


def _dlt(p3, p2, K):
    """Pose from the normalized-coordinate DLT, projected onto SO(3)."""
    xn = (p2[:, 0] - K.cx) / K.fx
    yn = (p2[:, 1] - K.cy) / K.fy
    mean = p3.mean(axis=0)
    scale = np.sqrt(2.0) / max(np.mean(np.linalg.norm(p3 - mean, axis=1)), 1e-12)
    X = np.hstack([(p3 - mean) * scale, np.ones((len(p3), 1))])
    n = len(p3)
    A = np.zeros((2 * n, 12))
    A[0::2, 0:4] = X
    A[0::2, 8:12] = -xn[:, None] * X
    A[1::2, 4:8] = X
    A[1::2, 8:12] = -yn[:, None] * X
    P = np.linalg.svd(A)[2][-1].reshape(3, 4)
    # undo the 3D normalization: X_norm = scale * (X - mean)
    M = P[:, :3] * scale
    p4 = P[:, 3] - M @ mean
    # the null vector's sign is arbitrary; pick the one with points in front
    if np.mean(p3 @ M[2] + p4[2]) < 0:
        M, p4 = -M, -p4
    U, S, Vt = np.linalg.svd(M)
    R = U @ np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))]) @ Vt
    s = S.mean()
    t = p4 / s
    return R, t


def _proper(R):
    U, _, Vt = np.linalg.svd(R)
    return U @ np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))]) @ Vt


def _homography_init(p3, p2, K):
    """Pose from a plane-to-image homography fitted on the model's best plane.

    Near-planar point sets (like a foot's keypoints) make the full DLT
    ill-conditioned under noise; this initializer ignores the small
    out-of-plane extent instead.
    """
    c = p3.mean(axis=0)
    Vt = np.linalg.svd(p3 - c)[2]
    if np.linalg.det(Vt) < 0:
        Vt[2] = -Vt[2]
    ab = (p3 - c) @ Vt[:2].T
    s = np.sqrt(2.0) / max(np.mean(np.linalg.norm(ab, axis=1)), 1e-12)
    ab = ab * s
    xn = (p2[:, 0] - K.cx) / K.fx
    yn = (p2[:, 1] - K.cy) / K.fy
    n = len(p3)
    X = np.hstack([ab, np.ones((n, 1))])
    A = np.zeros((2 * n, 9))
    A[0::2, 0:3] = X
    A[0::2, 6:9] = -xn[:, None] * X
    A[1::2, 3:6] = X
    A[1::2, 6:9] = -yn[:, None] * X
    H = np.linalg.svd(A)[2][-1].reshape(3, 3)
    H = H @ np.diag([s, s, 1.0])
    lam = 2.0 / (np.linalg.norm(H[:, 0]) + np.linalg.norm(H[:, 1]))
    if H[2, 2] < 0:
        lam = -lam
    r1, r2 = lam * H[:, 0], lam * H[:, 1]
    Rp = _proper(np.stack([r1, r2, np.cross(r1, r2)], axis=1))
    tp = lam * H[:, 2]
    R = Rp @ Vt
    return R, tp - R @ c


def _residuals(p3, p2, R, t, K):
    pc = p3 @ R.T + t
    z = pc[:, 2]
    u = K.fx * pc[:, 0] / z + K.cx
    v = K.fy * pc[:, 1] / z + K.cy
    r = np.empty(2 * len(p3))
    r[0::2] = u - p2[:, 0]
    r[1::2] = v - p2[:, 1]
    return r, pc


def _jacobian(pc, R, p3, K):
    """d(residual)/d(rotation increment, translation); increment applied as exp(w) R."""
    x, y, z = pc[:, 0], pc[:, 1], pc[:, 2]
    n = len(pc)
    duv = np.zeros((n, 2, 3))
    duv[:, 0, 0] = K.fx / z
    duv[:, 0, 2] = -K.fx * x / z**2
    duv[:, 1, 1] = K.fy / z
    duv[:, 1, 2] = -K.fy * y / z**2
    q = p3 @ R.T
    # d(exp(w) q)/dw at w = 0 is -[q]_x
    skew = np.zeros((n, 3, 3))
    skew[:, 0, 1], skew[:, 0, 2] = q[:, 2], -q[:, 1]
    skew[:, 1, 0], skew[:, 1, 2] = -q[:, 2], q[:, 0]
    skew[:, 2, 0], skew[:, 2, 1] = q[:, 1], -q[:, 0]
    J = np.empty((n, 2, 6))
    J[:, :, :3] = duv @ skew
    J[:, :, 3:] = duv
    return J.reshape(2 * n, 6)


def solve_pnp(
    points2d,
    points3d,
    K: Intrinsics,
    max_iter: int = 50,
    gtol: float = 1e-10,
    damping: float = 1e-3,
    initial_pose: Pose = None,
) -> PnPResult:
    """Pose whose projection of ``points3d`` best matches ``points2d``.

    Parameters
    ----------
    points2d : array-like, shape (n, 2)
        Observed pixels.
    points3d : array-like, shape (n, 3)
        Model-frame points, not coplanar, ``n >= 6``.
    K : Intrinsics
    max_iter, gtol, damping
        Levenberg-Marquardt iteration cap, gradient tolerance and initial
        damping (scaled x10 on rejected steps, /10 on accepted ones).
    initial_pose : Pose, optional
        Skips the DLT initialization.

    Returns
    -------
    PnPResult
        ``residual`` is the mean Euclidean reprojection error in pixels.

    Raises
    ------
    InsufficientDataError
        Fewer than 6 correspondences.
    NonConvergenceError
        The iteration cap was hit before convergence; carries the best pose.
    """
    p2 = as_points(points2d, 2)
    p3 = as_points(points3d, 3)
    if len(p2) != len(p3):
        raise ValueError(f"got {len(p2)} image points but {len(p3)} model points")
    if len(p2) < MIN_CORRESPONDENCES:
        raise InsufficientDataError(
            f"PnP needs at least {MIN_CORRESPONDENCES} correspondences, got {len(p2)}"
        )
    if initial_pose is None:
        starts = [_dlt(p3, p2, K), _homography_init(p3, p2, K)]
    else:
        starts = [(initial_pose.matrix, np.array(initial_pose.translation))]

    seeds = []
    for R, t in starts:
        t = _in_front(p3, R, t)
        r0 = _residuals(p3, p2, R, t, K)[0]
        seeds.append((r0 @ r0, R, t))
    lowest = min(s[0] for s in seeds)
    best = None
    for cost0, R, t in seeds:
        if cost0 > SEED_COST_RATIO * lowest + 1e-9:
            continue
        run = _levenberg_marquardt(p3, p2, K, Pose.from_matrix(R, t).rotation, t, max_iter, gtol, damping)
        # prefer converged runs, then lower cost
        if best is None or (run[3], -run[2]) > (best[3], -best[2]):
            best = run
    q, t, cost, converged, it, r = best
    pose = Pose(q, t)
    residual = float(np.mean(np.hypot(r[0::2], r[1::2])))
    if not converged:
        raise NonConvergenceError(
            f"Levenberg-Marquardt did not converge in {max_iter} iterations "
            f"(mean residual {residual:.4g} px)",
            pose=pose,
            residual=residual,
        )
    return PnPResult(pose, residual, it)


def _in_front(p3, R, t):
    z = p3 @ R[2] + t[2]
    if np.all(z > 0):
        return t
    # a noisy initializer can land behind the camera; push the model out
    t = np.array(t, dtype=np.float64)
    t[2] += 1e-3 - z.min() + np.ptp(z)
    return t


def _levenberg_marquardt(p3, p2, K, q, t, max_iter, gtol, damping):
    R = quat_to_matrix(q)
    r, pc = _residuals(p3, p2, R, t, K)
    cost = r @ r
    lam = damping
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        J = _jacobian(pc, R, p3, K)
        g = J.T @ r
        if np.max(np.abs(g)) <= gtol:
            converged = True
            break
        H = J.T @ J
        step_taken = False
        while lam < 1e16:
            A = H + lam * np.diag(np.maximum(np.diag(H), 1e-12))
            try:
                delta = -np.linalg.solve(A, g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            q_new = quat_multiply(axis_angle_to_quat(delta[:3]), q)
            q_new /= np.linalg.norm(q_new)
            t_new = t + delta[3:]
            R_new = quat_to_matrix(q_new)
            r_new, pc_new = _residuals(p3, p2, R_new, t_new, K)
            cost_new = r_new @ r_new
            if np.all(pc_new[:, 2] > 0) and cost_new < cost:
                rel = (cost - cost_new) / max(cost, 1e-300)
                q, t, R, r, pc = q_new, t_new, R_new, r_new, pc_new
                cost = cost_new
                lam = max(lam / 10.0, 1e-12)
                step_taken = True
                break
            lam *= 10.0
        if not step_taken:
            # no descent direction left at machine precision: stationary point
            converged = True
            break
        if rel < FTOL or np.linalg.norm(delta) < XTOL * (np.linalg.norm(t) + 1.0):
            converged = True
            break
    return q, t, cost, converged, it, r


def solve_instance(keypoints2d, model: FootModel, K: Intrinsics, **kwargs) -> PnPResult:
    """PnP on the present keypoints of one foot (NaN rows are skipped)."""
    kp = np.asarray(keypoints2d, dtype=np.float64).reshape(NUM_KEYPOINTS, 2)
    ok = np.all(np.isfinite(kp), axis=1)
    return solve_pnp(kp[ok], model.keypoints3d[ok], K, **kwargs)


def project_model_keypoints(model: FootModel, pose: Pose, K: Intrinsics) -> np.ndarray:
    """Pixel positions of the 8 model keypoints under ``pose``, shape ``(8, 2)``."""
    return project_points(transform_points(model.keypoints3d, pose), K)


def pose_error(estimate: Pose, truth: Pose):
    """``(mean |Euler error| in degrees, translation error in cm)``.

    The rotation error is the intrinsic X-Y-Z decomposition of
    ``R_est^T R_truth``.
    """
    rel = estimate.matrix.T @ truth.matrix
    euler = np.degrees(np.abs(euler_xyz(rel)))
    dist = np.linalg.norm(np.asarray(estimate.translation) - np.asarray(truth.translation))
    return float(euler.mean()), float(dist * 100.0)
