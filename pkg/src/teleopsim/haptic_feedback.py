"""Haptic feedback rendered from the compliant tracking error.

Instead of echoing raw contact forces (which step discontinuously at
contact onset), the feedback is generated by a virtual spring-damper acting
on the motion error of the interaction controller, rotated into the leader
base frame with the same camera-roll correspondence used for motion. The
result is saturated to what the device can exert and gated by a dead band
on the measured contact force so residual tracking error after release is
not felt.
"""

from __future__ import annotations

import numpy as np

from .admittance import TrackingError
from .eye_hand import FrameConfig
from .filters import VectorWindow
from .se3 import Rotation3, UnitQuaternion, elementary_rotation, quat_to_rotation


class HapticFeedbackParams:
    """Virtual stiffness/damping diagonals plus output limits."""

    def __init__(self, stiffness, damping, max_force: float, dead_band: float):
        self.stiffness = np.array(stiffness, dtype=float).reshape(3)
        self.damping = np.array(damping, dtype=float).reshape(3)
        if np.any(self.stiffness < 0.0) or np.any(self.damping < 0.0):
            raise ValueError("stiffness and damping must be >= 0")
        if max_force <= 0.0:
            raise ValueError("max force must be positive")
        if dead_band < 0.0:
            raise ValueError("dead band must be >= 0")
        self.max_force = float(max_force)
        self.dead_band = float(dead_band)


def feedback_force(
    pos_error_tool: np.ndarray,
    vel_error_tool: np.ndarray,
    leader_rotation: Rotation3,
    tool_to_stylus_current: Rotation3,
    params: HapticFeedbackParams,
) -> np.ndarray:
    """Spring-damper force on the rotated tool-frame errors.

    ``tool_to_stylus_current`` must already include the camera-roll
    compensation so the felt force matches the interaction seen on screen.
    """
    chain = leader_rotation @ tool_to_stylus_current
    p = chain.matrix @ np.asarray(pos_error_tool, dtype=float)
    v = chain.matrix @ np.asarray(vel_error_tool, dtype=float)
    return params.stiffness * p + params.damping * v


def saturate(force: np.ndarray, max_force: float) -> np.ndarray:
    """Clamp the force norm, preserving direction."""
    if max_force <= 0.0:
        raise ValueError("max force must be positive")
    f = np.asarray(force, dtype=float)
    n = float(np.linalg.norm(f))
    if n < max_force:
        return f.copy()
    return f * (max_force / n)


def dead_band(force: np.ndarray, measured_force_norm: float, threshold: float) -> np.ndarray:
    """Zero the feedback unless the measured contact force exceeds the band (strict)."""
    if measured_force_norm > threshold:
        return np.asarray(force, dtype=float).copy()
    return np.zeros(3)


class HapticFeedbackController:
    """Per-session feedback pipeline.

    The error velocity is smoothed over a short window before entering the
    damping term so quantization spikes are not rendered to the operator.
    """

    def __init__(self, params: HapticFeedbackParams, cfg: FrameConfig, smoothing_window: int = 4):
        self.params = params
        self.cfg = cfg
        self.velocity_filter = VectorWindow(smoothing_window)

    def tick(
        self,
        error: TrackingError,
        measured_force_norm: float,
        leader_orientation: UnitQuaternion,
        phi: float,
    ) -> np.ndarray:
        vel = self.velocity_filter.push(error.velocity)
        stylus_to_tool = self.cfg.stylus_to_tool
        if self.cfg.compensate_viewing_angle:
            stylus_to_tool = elementary_rotation("z", phi) @ stylus_to_tool
        tool_to_stylus = stylus_to_tool.transpose()
        f = feedback_force(
            error.position,
            vel,
            quat_to_rotation(leader_orientation),
            tool_to_stylus,
            self.params,
        )
        f = saturate(f, self.params.max_force)
        return dead_band(f, measured_force_norm, self.params.dead_band)
