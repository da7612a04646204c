"""Eye-hand coordination: engagement, twist mapping and reference integration.

The leader stylus is coupled to the robot tool so that motion commanded by
the operator stays consistent with what the eye-in-hand camera shows. The
chain per control cycle is:

1. smooth the raw stylus pose,
2. differentiate it into a stylus twist,
3. rotate the twist into the tool frame, compensating the current camera
   roll (the viewing angle) about the optical axis, and scale translations,
4. integrate the resulting tool twist into a desired tool pose.

The viewing angle is recovered each cycle from the absolute measured tool
orientation against the orientation latched at the end of the engagement
phase, so it accumulates no drift over long sessions.

The controller is a single-writer stateful object, one per session.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .filters import FilteredPose, PoseWindow
from .se3 import (
    AxisAngle,
    Pose,
    Rotation3,
    Transform,
    Twist,
    UnitQuaternion,
    axis_angle_from_quat,
    axis_angle_from_rotation,
    elementary_rotation,
    quat_conjugate,
    quat_multiply,
    quat_to_rotation,
    rotation_from_rotvec,
    rotation_to_quat,
    swing_twist_about_z,
)


@dataclass(frozen=True)
class FrameConfig:
    """Fixed frame relations of a teleoperation setup.

    ``stylus_to_tool`` maps stylus-frame quantities into the tool frame; it
    must map the stylus z axis onto the tool z axis (the camera optical
    axis) for the pre- and post-multiplied forms of the viewing-angle
    compensation to coincide. ``compensate_viewing_angle=False`` pins the
    roll compensation to identity, making the mapping independent of the
    camera roll.
    """

    leader_base_to_robot_base: Rotation3
    tool_to_stylus: Rotation3
    stylus_to_tool: Rotation3
    camera_axis_is_z: bool = True
    compensate_viewing_angle: bool = True

    @staticmethod
    def identity() -> "FrameConfig":
        i = Rotation3.identity()
        return FrameConfig(i, i, i)

    def preserves_camera_axis(self, tol: float = 1e-9) -> bool:
        z = np.array([0.0, 0.0, 1.0])
        return bool(np.linalg.norm(self.stylus_to_tool.apply(z) - z) < tol)


@dataclass(frozen=True)
class ScalingMatrix:
    """Diagonal twist scaling; translational gains only, rotations pass through."""

    x: float = 1.0
    y: float = 1.0
    z: float = 1.0

    def __post_init__(self):
        if min(self.x, self.y, self.z) <= 0.0:
            raise ValueError("scaling gains must be positive")

    def gains(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def as_matrix(self) -> np.ndarray:
        return np.diag([self.x, self.y, self.z, 1.0, 1.0, 1.0])

    def apply(self, v: Twist) -> Twist:
        return Twist(v.linear * self.gains(), v.angular)


@dataclass
class EyeHandState:
    """Per-session mapping state."""

    prev_filtered: FilteredPose | None = None
    prev_desired: Transform | None = None
    engagement_reference: Rotation3 | None = None
    engaged: bool = False
    viewing_angle: float = 0.0
    viewing_angle_degenerate: bool = False


def engagement_target(stylus: Transform, tool_position: np.ndarray, cfg: FrameConfig) -> Transform:
    """Tool-frame target shown during engagement.

    Orientation chains the stylus orientation through the fixed frame
    relations; position is pinned to the current tool position since the
    stylus position plays no role in the rotational coupling.
    """
    rot = cfg.leader_base_to_robot_base @ stylus.rotation @ cfg.tool_to_stylus
    return Transform(rot, np.asarray(tool_position, dtype=float))


def engagement_aligned(measured: Rotation3, desired: Rotation3, tol_rad: float) -> bool:
    """True iff the relative rotation angle is strictly below the tolerance."""
    if tol_rad <= 0.0:
        raise ValueError("tolerance must be positive")
    rel = measured.transpose() @ desired
    return axis_angle_from_rotation(rel).angle < tol_rad


def stylus_twist(prev: FilteredPose, curr: FilteredPose, period: float) -> Twist:
    """Stylus twist from two consecutive filtered poses.

    Linear part is the position difference over the period; angular part is
    the axis-angle vector of the relative orientation over the period.
    """
    if period <= 0.0:
        raise ValueError("period must be positive")
    linear = (curr.position - prev.position) / period
    rel = quat_multiply(quat_conjugate(prev.orientation), curr.orientation)
    aa = axis_angle_from_quat(rel)
    return Twist(linear, aa.as_rotvec() / period)


def viewing_angle(measured: Rotation3, reference: Rotation3) -> tuple[float, bool]:
    """Camera roll about the optical axis relative to the engagement reference.

    Extracted as the z-twist of the relative rotation; the caller should
    retain the previous value when the decomposition is degenerate.
    """
    rel = rotation_to_quat(reference.transpose() @ measured)
    st = swing_twist_about_z(rel)
    return st.twist_angle, st.degenerate


def map_twist(
    v_stylus: Twist,
    stylus_pose: FilteredPose,
    tool_rotation: Rotation3,
    phi: float,
    scaling: ScalingMatrix,
    cfg: FrameConfig,
) -> Twist:
    """Map a stylus twist into a desired tool twist in the robot base.

    The twist is brought into the stylus frame, mapped into the tool frame
    with the roll compensation applied there, scaled, and finally rotated
    into the robot base by the measured tool orientation.
    """
    stylus_rot = quat_to_rotation(stylus_pose.orientation)
    into_tool = cfg.stylus_to_tool @ stylus_rot.transpose()
    if cfg.compensate_viewing_angle:
        into_tool = elementary_rotation("z", phi) @ into_tool
    v_tool = Twist(into_tool.matrix @ v_stylus.linear, into_tool.matrix @ v_stylus.angular)
    v_scaled = scaling.apply(v_tool)
    m = tool_rotation.matrix
    return Twist(m @ v_scaled.linear, m @ v_scaled.angular)


def map_twist_postmultiplied(
    v_stylus: Twist,
    stylus_pose: FilteredPose,
    tool_rotation: Rotation3,
    phi: float,
    scaling: ScalingMatrix,
    cfg: FrameConfig,
) -> Twist:
    """Equivalent mapping with the roll applied in the stylus frame.

    Valid only when ``stylus_to_tool`` preserves the camera axis; kept as a
    cross-check of the canonical tool-frame form.
    """
    stylus_rot = quat_to_rotation(stylus_pose.orientation)
    into_tool = cfg.stylus_to_tool
    if cfg.compensate_viewing_angle:
        into_tool = into_tool @ elementary_rotation("z", phi)
    into_tool = into_tool @ stylus_rot.transpose()
    v_tool = Twist(into_tool.matrix @ v_stylus.linear, into_tool.matrix @ v_stylus.angular)
    v_scaled = scaling.apply(v_tool)
    m = tool_rotation.matrix
    return Twist(m @ v_scaled.linear, m @ v_scaled.angular)


def integrate_reference(
    prev_desired: Transform,
    v_desired: Twist,
    measured_rotation: Rotation3,
    period: float,
) -> Transform:
    """One integration step of the desired tool pose.

    The position advances from the previous desired position; the
    orientation is re-anchored each cycle to the measured tool orientation
    and composed with the exponential of the body-frame angular increment,
    so orientation errors never accumulate in the reference.
    """
    r_body = measured_rotation.transpose().apply(v_desired.angular * period)
    rotation = measured_rotation @ rotation_from_rotvec(r_body)
    translation = prev_desired.translation + v_desired.linear * period
    return Transform(rotation, translation)


class EyeHandController:
    """Stylus-to-tool mapping pipeline with per-session state."""

    def __init__(
        self,
        cfg: FrameConfig,
        scaling: ScalingMatrix,
        period: float,
        pose_window: int = 16,
        engagement_tolerance: float = 0.02,
    ):
        if period <= 0.0:
            raise ValueError("period must be positive")
        self.cfg = cfg
        self.scaling = scaling
        self.period = period
        self.engagement_tolerance = engagement_tolerance
        self.pose_filter = PoseWindow(pose_window)
        self.state = EyeHandState()

    def engagement_target(self, stylus: Pose, tool: Pose) -> Transform:
        return engagement_target(
            Transform(quat_to_rotation(stylus.orientation), stylus.position),
            tool.position,
            self.cfg,
        )

    def is_aligned(self, tool: Pose, target: Transform) -> bool:
        return engagement_aligned(quat_to_rotation(tool.orientation), target.rotation, self.engagement_tolerance)

    def latch_engagement(self, stylus: Pose, tool: Pose) -> None:
        """End the engagement phase: seed the filter and anchor the references."""
        filtered = self.pose_filter.push(stylus)
        tool_rot = quat_to_rotation(tool.orientation)
        self.state.prev_filtered = filtered
        self.state.prev_desired = Transform(tool_rot, tool.position)
        self.state.engagement_reference = tool_rot
        self.state.engaged = True
        self.state.viewing_angle = 0.0
        self.state.viewing_angle_degenerate = False

    def step(self, stylus_raw: Pose, tool_measured: Pose) -> Pose:
        """One control cycle: raw stylus pose in, desired tool pose out."""
        st = self.state
        if not st.engaged:
            raise RuntimeError("controller is not engaged")
        filtered = self.pose_filter.push(stylus_raw)
        v_stylus = stylus_twist(st.prev_filtered, filtered, self.period)
        tool_rot = quat_to_rotation(tool_measured.orientation)
        phi, degenerate = viewing_angle(tool_rot, st.engagement_reference)
        if degenerate:
            phi = st.viewing_angle
        st.viewing_angle = phi
        st.viewing_angle_degenerate = degenerate
        v_desired = map_twist(v_stylus, filtered, tool_rot, phi, self.scaling, self.cfg)
        desired = integrate_reference(st.prev_desired, v_desired, tool_rot, self.period)
        st.prev_filtered = filtered
        st.prev_desired = desired
        return Pose(desired.translation, rotation_to_quat(desired.rotation))

    @property
    def last_filtered(self) -> FilteredPose:
        return self.state.prev_filtered if self.state.prev_filtered is not None else self.pose_filter.mean()
