"""Rigid-body and pinhole-camera primitives.

Quaternions are stored as ``(w, x, y, z)`` everywhere in this package.
Angles are radians internally; degrees only show up in reported metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import BehindCameraError, InvalidRotationError

_QUAT_NORM_TOL = 1e-6


def _readonly(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def normalize_quaternion(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4,):
        raise InvalidRotationError(f"quaternion must have 4 components, got shape {q.shape}")
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n < 1e-12:
        raise InvalidRotationError("zero or non-finite quaternion")
    # already unit: keep the exact values so a pose survives a rebuild bitwise
    if abs(n - 1.0) <= 4 * np.finfo(np.float64).eps:
        return q.copy()
    return q / n


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix of a ``(w, x, y, z)`` quaternion.

    Non-unit input is renormalized; a zero quaternion raises
    :class:`InvalidRotationError`.
    """
    w, x, y, z = normalize_quaternion(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(R) -> np.ndarray:
    """Unit ``(w, x, y, z)`` quaternion of a rotation matrix, with ``w >= 0``.

    Uses Shepperd's method (branch on the largest diagonal term) so the
    result stays accurate near 180 degree rotations.
    """
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise InvalidRotationError(f"rotation matrix must be 3x3, got {R.shape}")
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    diag = (tr, R[0, 0], R[1, 1], R[2, 2])
    k = int(np.argmax(diag))
    if k == 0:
        s = 2.0 * np.sqrt(1.0 + tr)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif k == 1:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif k == 2:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def quat_multiply(a, b) -> np.ndarray:
    """Hamilton product ``a * b``."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def axis_angle_to_quat(rotvec) -> np.ndarray:
    rotvec = np.asarray(rotvec, dtype=np.float64)
    angle = np.linalg.norm(rotvec)
    if angle < 1e-12:
        # second-order series keeps the map smooth at zero
        q = np.concatenate([[1.0 - angle**2 / 8.0], 0.5 * rotvec])
        return q / np.linalg.norm(q)
    axis = rotvec / angle
    return np.concatenate([[np.cos(angle / 2)], np.sin(angle / 2) * axis])


def quat_angle(a, b) -> float:
    """Geodesic angle in radians between two rotations given as quaternions."""
    a = normalize_quaternion(a)
    b = normalize_quaternion(b)
    rel = quat_multiply(np.array([a[0], -a[1], -a[2], -a[3]]), b)
    return 2.0 * float(np.arctan2(np.linalg.norm(rel[1:]), abs(rel[0])))


@dataclass(frozen=True)
class Pose:
    """Rigid transform from the model frame to the camera frame.

    Parameters
    ----------
    rotation : array-like, shape (4,)
        Quaternion ``(w, x, y, z)``. Normalized on construction.
    translation : array-like, shape (3,)
        Camera-frame translation in meters.
    """

    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", _readonly(normalize_quaternion(self.rotation)))
        t = np.asarray(self.translation, dtype=np.float64)
        if t.shape != (3,):
            raise ValueError(f"translation must have 3 components, got shape {t.shape}")
        object.__setattr__(self, "translation", _readonly(t))

    @classmethod
    def from_matrix(cls, R, t) -> "Pose":
        return cls(matrix_to_quat(R), t)

    @classmethod
    def from_homogeneous(cls, T) -> "Pose":
        T = np.asarray(T, dtype=np.float64)
        return cls.from_matrix(T[:3, :3], T[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def homogeneous(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.matrix
        T[:3, 3] = self.translation
        return T

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(
            self.translation, other.translation
        )

    def __hash__(self):
        return hash((self.rotation.tobytes(), self.translation.tobytes()))


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixels (no distortion)."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def scaled(self, factor: float) -> "Intrinsics":
        return Intrinsics(self.fx * factor, self.fy * factor, self.cx * factor, self.cy * factor)


def as_points(points, dim=3) -> np.ndarray:
    """Coerce to a float64 ``(n, dim)`` array (a single point becomes ``(1, dim)``)."""
    p = np.asarray(points, dtype=np.float64)
    if p.ndim == 1:
        p = p.reshape(1, -1)
    if p.ndim != 2 or p.shape[1] != dim:
        raise ValueError(f"expected points of shape (n, {dim}), got {p.shape}")
    return p


def transform_points(cloud, pose: Pose) -> np.ndarray:
    """Map model-frame points to the camera frame: ``R p + t``."""
    return as_points(cloud) @ pose.matrix.T + pose.translation


def project_points(points, K: Intrinsics, which=None) -> np.ndarray:
    """Vectorized pinhole projection of camera-frame points, shape ``(n, 2)``."""
    p = as_points(points)
    z = p[:, 2]
    if np.any(~(z > 0)):
        bad = int(np.argmax(~(z > 0)))
        raise BehindCameraError(
            f"point {bad} has non-positive depth {z[bad]:.6g}"
            + (f" under {which}" if which else ""),
            which=which,
        )
    u = K.fx * p[:, 0] / z + K.cx
    v = K.fy * p[:, 1] / z + K.cy
    return np.stack([u, v], axis=1)


def project_point(p, K: Intrinsics) -> np.ndarray:
    """Project a single camera-frame point; raises if it is behind the camera."""
    return project_points(p, K)[0]


def back_project(uv, depth, K: Intrinsics) -> np.ndarray:
    """Camera-frame points at the given depths that project to ``uv``."""
    uv = as_points(uv, 2)
    depth = np.broadcast_to(np.asarray(depth, dtype=np.float64), (uv.shape[0],))
    x = (uv[:, 0] - K.cx) / K.fx * depth
    y = (uv[:, 1] - K.cy) / K.fy * depth
    return np.stack([x, y, depth], axis=1)


def euler_xyz(R) -> np.ndarray:
    """Intrinsic X-Y-Z Euler angles (radians) with ``R = Rx(a) @ Ry(b) @ Rz(c)``."""
    R = np.asarray(R, dtype=np.float64)
    b = np.arcsin(np.clip(R[0, 2], -1.0, 1.0))
    a = np.arctan2(-R[1, 2], R[2, 2])
    c = np.arctan2(-R[0, 1], R[0, 0])
    return np.array([a, b, c])


def rotation_from_euler_xyz(a, b, c) -> np.ndarray:
    ca, sa, cb, sb, cc, sc = np.cos(a), np.sin(a), np.cos(b), np.sin(b), np.cos(c), np.sin(c)
    Rx = np.array([[1, 0, 0], [0, ca, -sa], [0, sa, ca]])
    Ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    Rz = np.array([[cc, -sc, 0], [sc, cc, 0], [0, 0, 1]])
    return Rx @ Ry @ Rz
