"""Deterministic desk-scale simulation world.

Provides the pieces the control core is validated against: a scripted
leader stylus with synthetic physiological tremor, a speed-limited
kinematic follower, and spring-damper penalty contact surfaces standing in
for a rigid dental model. Everything is a pure function of (configuration,
seed, time), so identical runs produce bit-identical logs.

``TeleopSession`` closes the loop: stylus pose in, one synchronous control
cycle out, producing one log record per tick. The same session core is
driven by the offline experiment harness (scripted stylus) and the live
service (client stylus), which is what makes live sessions exactly
replayable offline.
"""

from __future__ import annotations

import math
import struct
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .admittance import ControlOutput, InteractionController
from .eye_hand import EyeHandController
from .haptic_feedback import HapticFeedbackController
from .se3 import (
    Pose,
    Twist,
    UnitQuaternion,
    Wrench,
    axis_angle_from_quat,
    quat_conjugate,
    quat_from_rotvec,
    quat_multiply,
    slerp,
)

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def _uniform(state: int) -> float:
    # strictly inside (0, 1) so Box-Muller never sees log(0)
    return ((state >> 11) + 0.5) * 2.0 ** -53


def _gauss3(seed: int, t: float) -> np.ndarray:
    """Three standard normals, a pure function of (seed, t)."""
    key = struct.unpack("<Q", struct.pack("<d", float(t)))[0]
    s = _splitmix64((seed & _MASK64) ^ key)
    u = []
    for _ in range(4):
        s = _splitmix64(s)
        u.append(_uniform(s))
    r1 = math.sqrt(-2.0 * math.log(u[0]))
    r2 = math.sqrt(-2.0 * math.log(u[2]))
    return np.array(
        [
            r1 * math.cos(2.0 * math.pi * u[1]),
            r1 * math.sin(2.0 * math.pi * u[1]),
            r2 * math.cos(2.0 * math.pi * u[3]),
        ]
    )


@dataclass(frozen=True)
class TremorComponent:
    """One sinusoidal tremor term displacing the stylus along a fixed axis."""

    amplitude: float  # m
    frequency_hz: float
    phase: float = 0.0
    axis: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if self.amplitude < 0.0:
            raise ValueError("amplitude must be >= 0")


@dataclass(frozen=True)
class TremorSpec:
    """Sum of sinusoids plus seeded white noise; reproducible given the seed."""

    components: tuple[TremorComponent, ...] = ()
    noise_std: float = 0.0  # m
    seed: int = 0

    def displacement(self, t: float) -> np.ndarray:
        d = np.zeros(3)
        for c in self.components:
            d = d + c.amplitude * math.sin(2.0 * math.pi * c.frequency_hz * t + c.phase) * np.asarray(c.axis, dtype=float)
        if self.noise_std > 0.0:
            d = d + self.noise_std * _gauss3(self.seed, t)
        return d

    @staticmethod
    def physiological(seed: int = 0) -> "TremorSpec":
        # two tremor-band sinusoids plus mild sensor-scale noise
        return TremorSpec(
            components=(
                TremorComponent(3e-4, 10.0, 0.0, (1.0, 0.0, 0.0)),
                TremorComponent(1.5e-4, 8.5, 1.0, (0.0, 1.0, 0.0)),
            ),
            noise_std=5e-5,
            seed=seed,
        )


@dataclass(frozen=True)
class Waypoint:
    """Timed stylus pose; ``interpolation`` governs the segment leaving it."""

    time: float
    pose: Pose
    interpolation: str = "linear"  # or "hold"

    def __post_init__(self):
        if self.interpolation not in ("linear", "hold"):
            raise ValueError(f"unknown interpolation: {self.interpolation!r}")


@dataclass(frozen=True)
class LeaderScript:
    waypoints: tuple[Waypoint, ...]
    tremor: TremorSpec = field(default_factory=TremorSpec)

    def __post_init__(self):
        if not self.waypoints:
            raise ValueError("script needs at least one waypoint")
        times = [w.time for w in self.waypoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("waypoint timestamps must be strictly increasing")

    def sample_nominal(self, t: float) -> Pose:
        wps = self.waypoints
        if t <= wps[0].time:
            return wps[0].pose
        if t >= wps[-1].time:
            return wps[-1].pose
        i = bisect_right([w.time for w in wps], t) - 1
        a, b = wps[i], wps[i + 1]
        if a.interpolation == "hold":
            return a.pose
        u = (t - a.time) / (b.time - a.time)
        pos = (1.0 - u) * a.pose.position + u * b.pose.position
        return Pose(pos, slerp(a.pose.orientation, b.pose.orientation, u))


def leader_sample(script: LeaderScript, t: float) -> Pose:
    """Scripted stylus pose plus tremor displacement; deterministic in (script, t)."""
    if t < 0.0:
        raise ValueError("time must be >= 0")
    nominal = script.sample_nominal(t)
    return Pose(nominal.position + script.tremor.displacement(t), nominal.orientation)


class FollowerModel:
    """Kinematic position-controlled robot with per-tick speed limits."""

    def __init__(self, pose: Pose, max_linear_speed: float = 0.25, max_angular_speed: float = 1.5):
        if max_linear_speed <= 0.0 or max_angular_speed <= 0.0:
            raise ValueError("speed limits must be positive")
        self.pose = pose
        self.max_linear_speed = max_linear_speed
        self.max_angular_speed = max_angular_speed

    def step(self, commanded: Pose, period: float) -> Pose:
        """Move toward the commanded pose, clamped by the speed limits."""
        dp = commanded.position - self.pose.position
        dist = float(np.linalg.norm(dp))
        max_step = self.max_linear_speed * period
        if dist <= max_step:
            pos = commanded.position
        else:
            pos = self.pose.position + dp * (max_step / dist)
        rel = quat_multiply(quat_conjugate(self.pose.orientation), commanded.orientation)
        aa = axis_angle_from_quat(rel)
        max_ang = self.max_angular_speed * period
        if aa.angle <= max_ang:
            ori = commanded.orientation
        else:
            ori = quat_multiply(self.pose.orientation, quat_from_rotvec(aa.axis * max_ang))
        self.pose = Pose(pos, ori)
        return self.pose


class PlaneSurface:
    """Half-space below ``point`` along the outward unit ``normal``."""

    def __init__(self, point, normal, stiffness: float, damping: float = 0.0):
        self.point = np.array(point, dtype=float).reshape(3)
        n = np.array(normal, dtype=float).reshape(3)
        nn = float(np.linalg.norm(n))
        if nn < 1e-12:
            raise ValueError("normal must be nonzero")
        self.normal = n / nn
        if stiffness <= 0.0 or damping < 0.0:
            raise ValueError("stiffness must be > 0 and damping >= 0")
        self.stiffness = stiffness
        self.damping = damping

    def contact_force(self, tip: np.ndarray, velocity: np.ndarray) -> np.ndarray:
        depth = -float((tip - self.point) @ self.normal)
        if depth <= 0.0:
            return np.zeros(3)
        rate = -float(velocity @ self.normal)
        fn = self.stiffness * depth + self.damping * rate
        return max(0.0, fn) * self.normal


class SphereSurface:
    """Solid sphere; force pushes the tip radially out of the surface."""

    def __init__(self, center, radius: float, stiffness: float, damping: float = 0.0):
        self.center = np.array(center, dtype=float).reshape(3)
        if radius <= 0.0 or stiffness <= 0.0 or damping < 0.0:
            raise ValueError("invalid sphere parameters")
        self.radius = radius
        self.stiffness = stiffness
        self.damping = damping

    def contact_force(self, tip: np.ndarray, velocity: np.ndarray) -> np.ndarray:
        r = tip - self.center
        dist = float(np.linalg.norm(r))
        if dist >= self.radius or dist < 1e-12:
            return np.zeros(3)
        normal = r / dist
        depth = self.radius - dist
        rate = -float(velocity @ normal)
        fn = self.stiffness * depth + self.damping * rate
        return max(0.0, fn) * normal


def contact_wrench(tool_tip: Pose, tip_velocity: Twist, surfaces) -> Wrench:
    """Sum of penalty contact forces at the tool tip; point contact, zero torque."""
    total = np.zeros(3)
    for s in surfaces:
        total = total + s.contact_force(tool_tip.position, tip_velocity.linear)
    return Wrench(total, np.zeros(3))


@dataclass(frozen=True)
class LogRecord:
    """One control tick of telemetry; the substrate of all statistics."""

    t: float
    force_norm: float  # raw measured contact force norm, N
    penetration: float  # unscaled tool-frame reference norm, m
    desired: Pose | None
    commanded: Pose
    measured: Pose
    viewing_angle: float
    stale_reference: bool
    deviation_clamped: bool
    emergency_active: bool
    feedback_force: np.ndarray

    def __post_init__(self):
        f = np.array(self.feedback_force, dtype=float).reshape(3)
        f.setflags(write=False)
        object.__setattr__(self, "feedback_force", f)


def _pose_to_obj(p: Pose | None):
    if p is None:
        return None
    q = p.orientation
    return {"position": [float(v) for v in p.position], "orientation": [q.w, q.x, q.y, q.z]}


def _pose_from_obj(obj) -> Pose | None:
    if obj is None:
        return None
    return Pose(np.array(obj["position"], dtype=float), UnitQuaternion(*obj["orientation"]))


def record_to_obj(r: LogRecord) -> dict:
    return {
        "t": r.t,
        "force_norm": r.force_norm,
        "penetration": r.penetration,
        "desired": _pose_to_obj(r.desired),
        "commanded": _pose_to_obj(r.commanded),
        "measured": _pose_to_obj(r.measured),
        "viewing_angle": r.viewing_angle,
        "stale_reference": r.stale_reference,
        "deviation_clamped": r.deviation_clamped,
        "emergency_active": r.emergency_active,
        "feedback_force": [float(v) for v in r.feedback_force],
    }


def record_from_obj(obj: dict) -> LogRecord:
    return LogRecord(
        t=float(obj["t"]),
        force_norm=float(obj["force_norm"]),
        penetration=float(obj["penetration"]),
        desired=_pose_from_obj(obj["desired"]),
        commanded=_pose_from_obj(obj["commanded"]),
        measured=_pose_from_obj(obj["measured"]),
        viewing_angle=float(obj["viewing_angle"]),
        stale_reference=bool(obj["stale_reference"]),
        deviation_clamped=bool(obj["deviation_clamped"]),
        emergency_active=bool(obj["emergency_active"]),
        feedback_force=np.array(obj["feedback_force"], dtype=float),
    )


class TeleopSession:
    """One synchronous control loop: leader in, follower telemetry out.

    Tick order: read the start-of-tick follower pose and force measurement,
    map the stylus pose to a desired tool pose, run interaction control,
    advance the follower toward the command, evaluate contact at the new
    tip pose (next tick's measurement), and render haptic feedback.
    """

    def __init__(
        self,
        eye_hand: EyeHandController,
        interaction: InteractionController,
        feedback: HapticFeedbackController,
        follower: FollowerModel,
        surfaces,
        period: float,
    ):
        self.eye_hand = eye_hand
        self.interaction = interaction
        self.feedback = feedback
        self.follower = follower
        self.surfaces = list(surfaces)
        self.period = period
        self.last_wrench = Wrench.zero()

    def engage(self, stylus: Pose) -> None:
        """Latch engagement at the current follower pose."""
        self.eye_hand.latch_engagement(stylus, self.follower.pose)

    @property
    def engaged(self) -> bool:
        return self.eye_hand.state.engaged

    def tick(self, stylus: Pose | None, t: float) -> LogRecord:
        measured = self.follower.pose
        wrench = self.last_wrench
        desired = self.eye_hand.step(stylus, measured) if stylus is not None else None
        out: ControlOutput = self.interaction.tick(desired, measured, wrench)
        new_pose = self.follower.step(out.commanded, self.period)
        tip_vel = Twist((new_pose.position - measured.position) / self.period, np.zeros(3))
        self.last_wrench = contact_wrench(new_pose, tip_vel, self.surfaces)
        fb = self.feedback.tick(
            out.error,
            out.force_norm,
            self.eye_hand.last_filtered.orientation,
            self.eye_hand.state.viewing_angle,
        )
        return LogRecord(
            t=t,
            force_norm=out.force_norm,
            penetration=out.virtual_penetration,
            desired=desired,
            commanded=out.commanded,
            measured=measured,
            viewing_angle=self.eye_hand.state.viewing_angle,
            stale_reference=out.events.stale_reference,
            deviation_clamped=out.events.deviation_clamped,
            emergency_active=out.events.emergency_active,
            feedback_force=fb,
        )
