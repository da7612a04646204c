"""Rigid-body algebra: unit quaternions, rotations, transforms, twists, wrenches.

Conventions fixed project-wide:

* Quaternions are scalar-first ``(w, x, y, z)`` and use the Hamilton product.
* Rotation matrices are 3x3 row-major; ``R @ v`` maps a vector from the
  child frame into the parent frame.
* All types are immutable values and every operation is pure, so they are
  safe to share between any number of concurrent callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

_UNIT_TOL = 1e-9
_ORTHO_TOL = 1e-6


def _as_vec3(v) -> np.ndarray:
    a = np.array(v, dtype=float).reshape(3)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class UnitQuaternion:
    """Scalar-first unit quaternion; renormalized on construction."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)
        if n < 1e-12:
            raise ValueError("quaternion norm too small to normalize")
        if abs(n - 1.0) > 0.0:
            inv = 1.0 / n
            object.__setattr__(self, "w", self.w * inv)
            object.__setattr__(self, "x", self.x * inv)
            object.__setattr__(self, "y", self.y * inv)
            object.__setattr__(self, "z", self.z * inv)

    @staticmethod
    def identity() -> "UnitQuaternion":
        return UnitQuaternion(1.0, 0.0, 0.0, 0.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class Rotation3:
    """3x3 orthonormal matrix with determinant +1."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float).reshape(3, 3)
        if not np.allclose(m @ m.T, np.eye(3), atol=_ORTHO_TOL):
            raise ValueError("matrix is not orthonormal")
        if np.linalg.det(m) < 0.0:
            raise ValueError("matrix has negative determinant")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @staticmethod
    def identity() -> "Rotation3":
        return Rotation3(np.eye(3))

    def transpose(self) -> "Rotation3":
        return Rotation3(self.matrix.T)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)

    def __matmul__(self, other: "Rotation3") -> "Rotation3":
        return Rotation3(self.matrix @ other.matrix)


@dataclass(frozen=True)
class Transform:
    """Homogeneous transform: rotation plus translation (m)."""

    rotation: Rotation3
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "translation", _as_vec3(self.translation))

    @staticmethod
    def identity() -> "Transform":
        return Transform(Rotation3.identity(), np.zeros(3))


@dataclass(frozen=True)
class Pose:
    """Position (m) plus orientation; interconvertible with Transform."""

    position: np.ndarray
    orientation: UnitQuaternion

    def __post_init__(self):
        object.__setattr__(self, "position", _as_vec3(self.position))

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), UnitQuaternion.identity())


@dataclass(frozen=True)
class Twist:
    """Linear (m/s) and angular (rad/s) velocity."""

    linear: np.ndarray
    angular: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "linear", _as_vec3(self.linear))
        object.__setattr__(self, "angular", _as_vec3(self.angular))

    @staticmethod
    def zero() -> "Twist":
        return Twist(np.zeros(3), np.zeros(3))


@dataclass(frozen=True)
class Wrench:
    """Force (N) and torque (N*m)."""

    force: np.ndarray
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "force", _as_vec3(self.force))
        object.__setattr__(self, "torque", _as_vec3(self.torque))

    @staticmethod
    def zero() -> "Wrench":
        return Wrench(np.zeros(3), np.zeros(3))


@dataclass(frozen=True)
class AxisAngle:
    """Unit axis and angle in [0, pi].

    ``degenerate`` marks an angle-pi matrix logarithm, where the axis sign
    is not recoverable and a deterministic choice was made.
    """

    axis: np.ndarray
    angle: float
    degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "axis", _as_vec3(self.axis))

    def as_rotvec(self) -> np.ndarray:
        return self.axis * self.angle


class SwingTwist(NamedTuple):
    swing: UnitQuaternion
    twist_angle: float
    degenerate: bool


def quat_multiply(a: UnitQuaternion, b: UnitQuaternion) -> UnitQuaternion:
    """Hamilton product a*b (apply b first, then a)."""
    return UnitQuaternion(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )


def quat_conjugate(q: UnitQuaternion) -> UnitQuaternion:
    return UnitQuaternion(q.w, -q.x, -q.y, -q.z)


def quat_to_rotation(q: UnitQuaternion) -> Rotation3:
    w, x, y, z = q.w, q.x, q.y, q.z
    return Rotation3(
        np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )
    )


def rotation_to_quat(r: Rotation3) -> UnitQuaternion:
    """Shepperd's method: pick the numerically largest component first."""
    m = r.matrix
    t = m[0, 0] + m[1, 1] + m[2, 2]
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        return UnitQuaternion(
            0.25 * s,
            (m[2, 1] - m[1, 2]) / s,
            (m[0, 2] - m[2, 0]) / s,
            (m[1, 0] - m[0, 1]) / s,
        )
    if m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        return UnitQuaternion(
            (m[2, 1] - m[1, 2]) / s,
            0.25 * s,
            (m[0, 1] + m[1, 0]) / s,
            (m[0, 2] + m[2, 0]) / s,
        )
    if m[1, 1] >= m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        return UnitQuaternion(
            (m[0, 2] - m[2, 0]) / s,
            (m[0, 1] + m[1, 0]) / s,
            0.25 * s,
            (m[1, 2] + m[2, 1]) / s,
        )
    s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
    return UnitQuaternion(
        (m[1, 0] - m[0, 1]) / s,
        (m[0, 2] + m[2, 0]) / s,
        (m[1, 2] + m[2, 1]) / s,
        0.25 * s,
    )


def quat_from_axis_angle(aa: AxisAngle) -> UnitQuaternion:
    half = 0.5 * aa.angle
    s = math.sin(half)
    return UnitQuaternion(math.cos(half), s * aa.axis[0], s * aa.axis[1], s * aa.axis[2])


def axis_angle_from_quat(q: UnitQuaternion) -> AxisAngle:
    """Axis-angle with angle in [0, pi]; never degenerate (quaternions keep the axis)."""
    w, v = q.w, q.vector()
    if w < 0.0:
        w, v = -w, -v
    s = float(np.linalg.norm(v))
    if s < 1e-12:
        return AxisAngle(np.array([1.0, 0.0, 0.0]), 0.0)
    angle = 2.0 * math.atan2(s, w)
    return AxisAngle(v / s, angle)


def rotation_from_axis_angle(aa: AxisAngle) -> Rotation3:
    """Rodrigues formula."""
    if aa.angle == 0.0:
        return Rotation3.identity()
    x, y, z = aa.axis / np.linalg.norm(aa.axis)
    c, s = math.cos(aa.angle), math.sin(aa.angle)
    t = 1.0 - c
    return Rotation3(
        np.array(
            [
                [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
                [x * y * t + z * s, c + y * y * t, y * z * t - x * s],
                [x * z * t - y * s, y * z * t + x * s, c + z * z * t],
            ]
        )
    )


def axis_angle_from_rotation(r: Rotation3) -> AxisAngle:
    """Matrix logarithm.

    At angle pi the axis sign is unrecoverable; the axis is rebuilt
    deterministically from the largest-magnitude diagonal column and the
    result is flagged degenerate.
    """
    m = r.matrix
    cos_angle = max(-1.0, min(1.0, 0.5 * (np.trace(m) - 1.0)))
    angle = math.acos(cos_angle)
    if angle < 1e-12:
        return AxisAngle(np.array([1.0, 0.0, 0.0]), 0.0)
    if math.pi - angle < 1e-6:
        # R ~= 2*a*a^T - I, so a*a^T = (R + I)/2; read the strongest column.
        b = 0.5 * (m + np.eye(3))
        j = int(np.argmax(np.diag(b)))
        axis = b[:, j] / math.sqrt(max(b[j, j], 1e-300))
        axis = axis / np.linalg.norm(axis)
        return AxisAngle(axis, angle, degenerate=True)
    axis = np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])
    axis = axis / (2.0 * math.sin(angle))
    return AxisAngle(axis / np.linalg.norm(axis), angle)


def rotation_from_rotvec(rv: np.ndarray) -> Rotation3:
    rv = np.asarray(rv, dtype=float)
    angle = float(np.linalg.norm(rv))
    if angle < 1e-12:
        return Rotation3.identity()
    return rotation_from_axis_angle(AxisAngle(rv / angle, angle))


def rotvec_from_rotation(r: Rotation3) -> np.ndarray:
    aa = axis_angle_from_rotation(r)
    return aa.as_rotvec()


def quat_from_rotvec(rv: np.ndarray) -> UnitQuaternion:
    rv = np.asarray(rv, dtype=float)
    angle = float(np.linalg.norm(rv))
    if angle < 1e-12:
        return UnitQuaternion.identity()
    return quat_from_axis_angle(AxisAngle(rv / angle, angle))


def elementary_rotation(axis_label: str, angle: float) -> Rotation3:
    """Rotation about one base axis: 'x', 'y' or 'z'."""
    c, s = math.cos(angle), math.sin(angle)
    if axis_label == "x":
        m = [[1, 0, 0], [0, c, -s], [0, s, c]]
    elif axis_label == "y":
        m = [[c, 0, s], [0, 1, 0], [-s, 0, c]]
    elif axis_label == "z":
        m = [[c, -s, 0], [s, c, 0], [0, 0, 1]]
    else:
        raise ValueError(f"unknown axis label: {axis_label!r}")
    return Rotation3(np.array(m, dtype=float))


def rotate_twist(r: Rotation3, v: Twist) -> Twist:
    """Rotate linear and angular parts by the same rotation (block-diagonal map)."""
    return Twist(r.matrix @ v.linear, r.matrix @ v.angular)


def rotate_wrench(r: Rotation3, h: Wrench) -> Wrench:
    return Wrench(r.matrix @ h.force, r.matrix @ h.torque)


def swing_twist_about_z(q: UnitQuaternion) -> SwingTwist:
    """Decompose q = swing * twist with twist a rotation about the z axis.

    The twist factor is the normalized (w, 0, 0, z) part. When w and z both
    vanish the decomposition is singular: the twist angle is reported as 0
    and the result is flagged.
    """
    n = math.hypot(q.w, q.z)
    if n < 1e-12:
        return SwingTwist(q, 0.0, True)
    twist = UnitQuaternion(q.w / n, 0.0, 0.0, q.z / n)
    angle = 2.0 * math.atan2(q.z, q.w)
    if angle > math.pi:
        angle -= 2.0 * math.pi
    elif angle <= -math.pi:
        angle += 2.0 * math.pi
    swing = quat_multiply(q, quat_conjugate(twist))
    return SwingTwist(swing, angle, False)


def compose(a: Transform, b: Transform) -> Transform:
    return Transform(a.rotation @ b.rotation, a.rotation.apply(b.translation) + a.translation)


def inverse(a: Transform) -> Transform:
    rt = a.rotation.transpose()
    return Transform(rt, -rt.apply(a.translation))


def transform_from_pose(p: Pose) -> Transform:
    return Transform(quat_to_rotation(p.orientation), p.position)


def pose_from_transform(t: Transform) -> Pose:
    return Pose(t.translation, rotation_to_quat(t.rotation))


def rotation_angle_between(a: Rotation3, b: Rotation3) -> float:
    """Geodesic angle of the relative rotation a^T b, in [0, pi]."""
    return axis_angle_from_rotation(a.transpose() @ b).angle


def quat_angle_between(a: UnitQuaternion, b: UnitQuaternion) -> float:
    d = abs(a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z)
    return 2.0 * math.acos(min(1.0, d))


def slerp(a: UnitQuaternion, b: UnitQuaternion, u: float) -> UnitQuaternion:
    """Spherical interpolation along the shorter arc."""
    va, vb = a.as_array(), b.as_array()
    d = float(va @ vb)
    if d < 0.0:
        vb, d = -vb, -d
    if d > 1.0 - 1e-10:
        out = (1.0 - u) * va + u * vb
        return UnitQuaternion(*out)
    theta = math.acos(min(1.0, d))
    s = math.sin(theta)
    out = (math.sin((1.0 - u) * theta) / s) * va + (math.sin(u * theta) / s) * vb
    return UnitQuaternion(*out)
