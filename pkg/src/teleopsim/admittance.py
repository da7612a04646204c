"""Follower-side interaction control.

An admittance law renders mass-spring-damper dynamics around the desired
tool pose: the measured contact wrench displaces a compliant frame that the
position-controlled robot then tracks. Two safeguards wrap the law: the
tool-frame position reference is attenuated by ``1 / (1 + gain * |f|)`` so
contact forces cannot grow unboundedly without any knowledge of the
environment, and a safety layer holds, clamps, or freezes the commanded
pose under stale references, excessive deviations, or force overloads.

The gain matrices are diagonal, so each axis obeys an independent
second-order linear system. The per-tick update uses the exact zero-order
hold discretization of that system, which is unconditionally stable and
keeps long-horizon trajectories within the tolerance of a refined
integrator (first-order stepping at this rate does not).

Controllers are single-writer stateful objects; ticks are synchronous and
deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .filters import VectorWindow
from .se3 import (
    Pose,
    Rotation3,
    Twist,
    UnitQuaternion,
    quat_angle_between,
    quat_from_rotvec,
    quat_multiply,
    quat_to_rotation,
    rotation_from_rotvec,
    rotvec_from_rotation,
    Wrench,
)


@dataclass(frozen=True)
class AdmittanceParams:
    """Diagonal mass, damping, and stiffness of the rendered dynamics.

    Entries 0..2 act on translation (kg, N*s/m, N/m), entries 3..5 on the
    axis-angle orientation offset (kg*m^2, N*m*s/rad, N*m/rad).
    """

    mass: np.ndarray
    damping: np.ndarray
    stiffness: np.ndarray

    def __post_init__(self):
        for name in ("mass", "damping", "stiffness"):
            v = np.array(getattr(self, name), dtype=float).reshape(6)
            if np.any(v <= 0.0):
                raise ValueError(f"{name} entries must be positive")
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @staticmethod
    def critically_damped(mass, stiffness) -> "AdmittanceParams":
        m = np.array(mass, dtype=float).reshape(6)
        k = np.array(stiffness, dtype=float).reshape(6)
        return AdmittanceParams(m, 2.0 * np.sqrt(k * m), k)


@dataclass(frozen=True)
class AdmittanceState:
    """Compliant-frame offset relative to the desired frame.

    ``offset_ori`` is the axis-angle vector of the orientation offset
    (small-angle regime, magnitude kept below pi).
    """

    offset_pos: np.ndarray
    offset_ori: np.ndarray
    vel: Twist
    acc: np.ndarray

    def __post_init__(self):
        p = np.array(self.offset_pos, dtype=float).reshape(3)
        o = np.array(self.offset_ori, dtype=float).reshape(3)
        a = np.array(self.acc, dtype=float).reshape(6)
        for arr in (p, o, a):
            arr.setflags(write=False)
        object.__setattr__(self, "offset_pos", p)
        object.__setattr__(self, "offset_ori", o)
        object.__setattr__(self, "acc", a)

    @staticmethod
    def zero() -> "AdmittanceState":
        return AdmittanceState(np.zeros(3), np.zeros(3), Twist.zero(), np.zeros(6))


def _zoh_axis_coefficients(m: float, d: float, k: float, period: float):
    """Exact discrete update of m*x'' + d*x' + k*x = u for constant u.

    Returns (a11, a12, a21, a22, b1, b2) with
    x+ = a11*x + a12*v + b1*u and v+ = a21*x + a22*v + b2*u.
    """
    dn = d / m
    kn = k / m
    t = period
    disc = dn * dn - 4.0 * kn
    lam = -0.5 * dn
    if abs(disc) <= 1e-9 * (dn * dn + 4.0 * kn):
        # repeated root: exp(A t) = e^(lam t) (I + (A - lam I) t)
        e = math.exp(lam * t)
        a11 = e * (1.0 - lam * t)
        a12 = e * t
        a21 = -e * kn * t
        a22 = e * (1.0 + lam * t)
    elif disc > 0.0:
        s = math.sqrt(disc)
        l1, l2 = lam + 0.5 * s, lam - 0.5 * s
        e1, e2 = math.exp(l1 * t), math.exp(l2 * t)
        dl = l1 - l2
        a11 = (l1 * e2 - l2 * e1) / dl
        a12 = (e1 - e2) / dl
        a21 = -kn * (e1 - e2) / dl
        a22 = (l1 * e1 - l2 * e2) / dl
    else:
        w = 0.5 * math.sqrt(-disc)
        e = math.exp(lam * t)
        c, s = math.cos(w * t), math.sin(w * t)
        a11 = e * (c - lam * s / w)
        a12 = e * s / w
        a21 = -e * kn * s / w
        a22 = e * (c + lam * s / w)
    # b = A^-1 (Ad - I) B with A = [[0, 1], [-kn, -dn]], B = [0, 1/m]
    b1 = (-dn * a12 - (a22 - 1.0)) / (kn * m)
    b2 = a12 / m
    return a11, a12, a21, a22, b1, b2


class AdmittanceModel:
    """Precomputed discrete update for fixed parameters and period."""

    def __init__(self, params: AdmittanceParams, period: float):
        if period <= 0.0:
            raise ValueError("period must be positive")
        self.params = params
        self.period = period
        coeffs = np.array(
            [
                _zoh_axis_coefficients(m, d, k, period)
                for m, d, k in zip(params.mass, params.damping, params.stiffness)
            ]
        )
        self._a11, self._a12, self._a21, self._a22, self._b1, self._b2 = coeffs.T

    def step(self, state: AdmittanceState, wrench: Wrench) -> AdmittanceState:
        x = np.concatenate([state.offset_pos, state.offset_ori])
        v = np.concatenate([state.vel.linear, state.vel.angular])
        u = np.concatenate([wrench.force, wrench.torque])
        x_new = self._a11 * x + self._a12 * v + self._b1 * u
        v_new = self._a21 * x + self._a22 * v + self._b2 * u
        acc = (u - self.params.damping * v_new - self.params.stiffness * x_new) / self.params.mass
        return AdmittanceState(
            x_new[:3], x_new[3:], Twist(v_new[:3], v_new[3:]), acc
        )


def admittance_step(
    state: AdmittanceState, wrench: Wrench, params: AdmittanceParams, period: float
) -> AdmittanceState:
    """Single discrete step of the rendered dynamics (pure convenience form)."""
    return AdmittanceModel(params, period).step(state, wrench)


@dataclass(frozen=True)
class SafetyConfig:
    """Force-limitation gain and safety thresholds."""

    scaling_gain: float  # 1/N, 0 disables the limiter
    force_threshold: float  # N, emergency stop entry
    force_release: float  # N, emergency stop exit (hysteresis)
    max_translation_deviation: float  # m
    max_rotation_deviation: float  # rad

    def __post_init__(self):
        if self.scaling_gain < 0.0:
            raise ValueError("scaling gain must be >= 0")
        if min(self.force_threshold, self.force_release, self.max_translation_deviation, self.max_rotation_deviation) <= 0.0:
            raise ValueError("thresholds must be positive")
        if self.force_release >= self.force_threshold:
            raise ValueError("force release must be below the force threshold")


@dataclass(frozen=True)
class SafetyEvents:
    stale_reference: bool = False
    deviation_clamped: bool = False
    emergency_active: bool = False


@dataclass(frozen=True)
class TrackingError:
    """Tool-frame motion error of the compliant tracking (m, m/s)."""

    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        p = np.array(self.position, dtype=float).reshape(3)
        v = np.array(self.velocity, dtype=float).reshape(3)
        p.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "velocity", v)


def reference_in_tool_frame(desired_pos, tool_pos, tool_rot: Rotation3) -> np.ndarray:
    """Desired position expressed in the current tool frame."""
    return tool_rot.matrix.T @ (np.asarray(desired_pos, dtype=float) - np.asarray(tool_pos, dtype=float))


def scale_reference(ref_tool, filtered_force, gain: float) -> np.ndarray:
    """Attenuate the tool-frame reference by 1 / (1 + gain * |force|)."""
    if gain < 0.0:
        raise ValueError("gain must be >= 0")
    f = float(np.linalg.norm(filtered_force))
    return np.asarray(ref_tool, dtype=float) / (1.0 + gain * f)


def compose_compliant_pose(
    scaled_ref_tool,
    desired_orientation: UnitQuaternion,
    tool_pos,
    tool_rot: Rotation3,
    state: AdmittanceState,
) -> Pose:
    """Assemble the base-frame compliant pose from the scaled reference and offset."""
    scaled_base = np.asarray(tool_pos, dtype=float) + tool_rot.matrix @ np.asarray(scaled_ref_tool, dtype=float)
    desired_rot = quat_to_rotation(desired_orientation)
    position = scaled_base + desired_rot.matrix @ state.offset_pos
    orientation = quat_multiply(desired_orientation, quat_from_rotvec(state.offset_ori))
    return Pose(position, orientation)


def apply_safety(
    candidate: Pose | None,
    measured: Pose,
    last_valid: Pose | None,
    force_norm: float,
    cfg: SafetyConfig,
    emergency_latched: bool,
) -> tuple[Pose, SafetyEvents]:
    """Safety gate over the candidate command.

    Missing candidates fall back to the last valid command (or the measured
    pose before any command existed). Candidates deviating too far from the
    measured pose are replaced by it. A force overload latches an emergency
    that keeps commanding the measured pose until the force falls below the
    release level.
    """
    stale = candidate is None
    pose = candidate if candidate is not None else (last_valid if last_valid is not None else measured)
    clamped = False
    trans_dev = float(np.linalg.norm(pose.position - measured.position))
    rot_dev = quat_angle_between(pose.orientation, measured.orientation)
    if trans_dev > cfg.max_translation_deviation or rot_dev > cfg.max_rotation_deviation:
        pose = measured
        clamped = True
    if emergency_latched:
        emergency = force_norm >= cfg.force_release
    else:
        emergency = force_norm > cfg.force_threshold
    if emergency:
        pose = measured
    return pose, SafetyEvents(stale, clamped, emergency)


@dataclass(frozen=True)
class ControlOutput:
    """Everything one interaction-control tick produces."""

    commanded: Pose
    compliant: Pose
    error: TrackingError
    events: SafetyEvents
    force_norm: float  # raw measured force norm, N
    virtual_penetration: float  # unscaled tool-frame reference norm, m
    scaled_reference_tool: np.ndarray
    filtered_force: np.ndarray


class InteractionController:
    """Per-session admittance pipeline at a fixed control rate.

    Order per tick: filter the measured force, express the reference in the
    tool frame, attenuate it by the filtered contact force, advance the
    rendered dynamics, compose the compliant pose, and gate it through the
    safety layer. The tracking error is reported against the attenuated
    reference, since that is what the rendered dynamics actually follow.
    """

    def __init__(
        self,
        params: AdmittanceParams,
        safety: SafetyConfig,
        period: float,
        force_window: int = 8,
    ):
        self.model = AdmittanceModel(params, period)
        self.safety = safety
        self.period = period
        self.force_filter = VectorWindow(force_window)
        self.state = AdmittanceState.zero()
        self._last_valid_desired: Pose | None = None
        self._emergency = False
        self._prev_error: np.ndarray | None = None

    def tick(self, desired: Pose | None, measured: Pose, wrench: Wrench) -> ControlOutput:
        stale = desired is None
        if stale:
            desired = self._last_valid_desired if self._last_valid_desired is not None else measured
        else:
            self._last_valid_desired = desired

        filtered_force = self.force_filter.push(wrench.force)
        tool_rot = quat_to_rotation(measured.orientation)
        ref_tool = reference_in_tool_frame(desired.position, measured.position, tool_rot)
        penetration = float(np.linalg.norm(ref_tool))
        scaled = scale_reference(ref_tool, filtered_force, self.safety.scaling_gain)

        desired_rot = quat_to_rotation(desired.orientation)
        wrench_local = Wrench(desired_rot.matrix.T @ wrench.force, desired_rot.matrix.T @ wrench.torque)
        self.state = self.model.step(self.state, wrench_local)

        compliant = compose_compliant_pose(scaled, desired.orientation, measured.position, tool_rot, self.state)
        force_norm = float(np.linalg.norm(wrench.force))
        commanded, events = apply_safety(
            compliant, measured, self._last_valid_desired, force_norm, self.safety, self._emergency
        )
        self._emergency = events.emergency_active
        if stale:
            events = replace(events, stale_reference=True)

        compliant_tool = tool_rot.matrix.T @ (compliant.position - measured.position)
        p_err = scaled - compliant_tool
        if self._prev_error is None:
            v_err = np.zeros(3)
        else:
            v_err = (p_err - self._prev_error) / self.period
        self._prev_error = p_err

        return ControlOutput(
            commanded=commanded,
            compliant=compliant,
            error=TrackingError(p_err, v_err),
            events=events,
            force_norm=force_norm,
            virtual_penetration=penetration,
            scaled_reference_tool=scaled,
            filtered_force=filtered_force,
        )
