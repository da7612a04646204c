from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from teleopsim.admittance import (
    AdmittanceModel,
    AdmittanceParams,
    AdmittanceState,
    InteractionController,
    SafetyConfig,
    admittance_step,
    apply_safety,
    compose_compliant_pose,
    reference_in_tool_frame,
    scale_reference,
)
from teleopsim.se3 import (
    Pose,
    Rotation3,
    Twist,
    UnitQuaternion,
    Wrench,
    elementary_rotation,
    quat_from_rotvec,
    quat_multiply,
    quat_to_rotation,
    transform_from_pose,
    compose,
)

T_S = 0.008

DEFAULT_PARAMS = AdmittanceParams.critically_damped(
    [6.0] * 3 + [0.15] * 3, [1000.0] * 3 + [10.0] * 3
)

SAFETY = SafetyConfig(
    scaling_gain=0.3,
    force_threshold=15.0,
    force_release=12.0,
    max_translation_deviation=0.05,
    max_rotation_deviation=0.5,
)


def random_rotation(rng) -> Rotation3:
    return quat_to_rotation(UnitQuaternion(*rng.normal(size=4)))


def euler_refined(params: AdmittanceParams, wrench_fn, duration: float, dt: float):
    """Independent oracle: semi-implicit Euler at a fine step."""
    x = np.zeros(6)
    v = np.zeros(6)
    steps = int(round(duration / dt))
    out = [x.copy()]
    for k in range(steps):
        u = wrench_fn(k * dt)
        a = (u - params.damping * v - params.stiffness * x) / params.mass
        v = v + a * dt
        x = x + v * dt
        out.append(x.copy())
    return np.array(out)


class TestReferenceInToolFrame:
    def test_zero_gap(self):
        p = np.array([0.1, 0.2, 0.3])
        assert np.allclose(reference_in_tool_frame(p, p, Rotation3.identity()), np.zeros(3))

    def test_identity_rotation(self):
        out = reference_in_tool_frame([0.0, 0.0, 0.004], np.zeros(3), Rotation3.identity())
        assert np.allclose(out, [0.0, 0.0, 0.004])

    def test_transform_inverse_oracle(self):
        rng = np.random.default_rng(9)
        for _ in range(300):
            r = random_rotation(rng)
            desired = rng.normal(size=3)
            tool = rng.normal(size=3)
            out = reference_in_tool_frame(desired, tool, r)
            oracle = np.linalg.inv(r.matrix) @ (desired - tool)
            assert np.abs(out - oracle).max() < 1e-12


class TestScaleReference:
    def test_free_space_unchanged(self):
        p = np.array([0.004, 0.0, 0.0])
        assert np.allclose(scale_reference(p, np.zeros(3), 0.5), p)

    def test_direct_substitution(self):
        out = scale_reference([0.004, 0.0, 0.0], [2.0, 0.0, 0.0], 0.5)
        assert np.allclose(out, [0.002, 0.0, 0.0])

    def test_disabled_limiter(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            p = rng.normal(size=3)
            f = rng.normal(size=3) * 10
            assert np.allclose(scale_reference(p, f, 0.0), p)

    def test_monotone_attenuation_and_bounds(self):
        rng = np.random.default_rng(11)
        p = np.array([0.004, -0.002, 0.001])
        prev_norm = np.inf
        for fmag in np.linspace(0.0, 50.0, 60):
            out = scale_reference(p, [fmag, 0.0, 0.0], 0.5)
            n = np.linalg.norm(out)
            assert n <= np.linalg.norm(p) + 1e-15
            assert n <= prev_norm + 1e-15
            # never flips direction: nonnegative multiple of the input
            assert np.allclose(np.cross(out, p), 0.0, atol=1e-15)
            assert out @ p >= 0.0
            prev_norm = n
        # equality iff gain * force = 0
        assert np.allclose(scale_reference(p, np.zeros(3), 0.5), p)


class TestAdmittanceStep:
    def test_equilibrium(self):
        state = AdmittanceState.zero()
        out = admittance_step(state, Wrench.zero(), DEFAULT_PARAMS, T_S)
        assert np.abs(out.offset_pos).max() == 0.0
        assert np.abs(out.vel.linear).max() == 0.0

    def test_steady_state_stiffness(self):
        state = AdmittanceState.zero()
        model = AdmittanceModel(DEFAULT_PARAMS, T_S)
        wrench = Wrench([10.0, 0.0, 0.0])
        for _ in range(int(5.0 / T_S)):
            state = model.step(state, wrench)
        assert abs(state.offset_pos[0] - 0.01) < 1e-6
        assert np.abs(state.offset_pos[1:]).max() < 1e-12

    def test_matches_refined_integrator_constant_input(self):
        model = AdmittanceModel(DEFAULT_PARAMS, T_S)
        state = AdmittanceState.zero()
        u = np.array([10.0, -4.0, 2.0, 0.05, 0.0, -0.02])
        wrench = Wrench(u[:3], u[3:])
        coarse = [np.zeros(6)]
        for _ in range(int(2.0 / T_S)):
            state = model.step(state, wrench)
            coarse.append(np.concatenate([state.offset_pos, state.offset_ori]))
        coarse = np.array(coarse)
        fine = euler_refined(DEFAULT_PARAMS, lambda t: u, 2.0, T_S / 100)[::100]
        assert np.abs(coarse - fine).max() < 1e-4

    def test_matches_refined_integrator_impulse_random_params(self):
        rng = np.random.default_rng(21)
        for _ in range(5):
            mass = rng.uniform(1.0, 10.0, size=6)
            stiffness = rng.uniform(100.0, 2000.0, size=6)
            zeta = rng.uniform(0.3, 2.0, size=6)
            damping = 2.0 * zeta * np.sqrt(stiffness * mass)
            params = AdmittanceParams(mass, damping, stiffness)
            model = AdmittanceModel(params, T_S)
            impulse = rng.normal(size=6) * 20.0

            def wrench_fn(t, impulse=impulse):
                # switch on a coarse tick boundary so both integrators see
                # the same piecewise-constant input
                return impulse if t < 0.096 else np.zeros(6)

            state = AdmittanceState.zero()
            coarse = [np.zeros(6)]
            for k in range(int(1.0 / T_S)):
                u = wrench_fn(k * T_S)
                state = model.step(state, Wrench(u[:3], u[3:]))
                coarse.append(np.concatenate([state.offset_pos, state.offset_ori]))
            fine = euler_refined(params, wrench_fn, 1.0, T_S / 100)[::100]
            assert np.abs(np.array(coarse) - fine).max() < 1e-4

    def test_unforced_decay(self):
        rng = np.random.default_rng(31)
        state = AdmittanceState(
            rng.normal(size=3) * 0.01, rng.normal(size=3) * 0.05,
            Twist(rng.normal(size=3) * 0.1, rng.normal(size=3) * 0.1), np.zeros(6),
        )
        initial = np.linalg.norm(state.offset_pos) + np.linalg.norm(state.vel.linear)
        model = AdmittanceModel(DEFAULT_PARAMS, T_S)
        for _ in range(10_000):
            state = model.step(state, Wrench.zero())
        final = (
            np.linalg.norm(state.offset_pos)
            + np.linalg.norm(state.offset_ori)
            + np.linalg.norm(state.vel.linear)
            + np.linalg.norm(state.vel.angular)
        )
        assert final < 1e-9 * max(initial, 1.0)

    def test_rejects_nonpositive_params(self):
        with pytest.raises(ValueError):
            AdmittanceParams([0.0] * 6, [1.0] * 6, [1.0] * 6)


class TestComposeCompliantPose:
    def test_zero_offset_gives_scaled_desired(self):
        rng = np.random.default_rng(41)
        tool_rot = random_rotation(rng)
        tool_pos = rng.normal(size=3)
        scaled = rng.normal(size=3) * 0.01
        q_des = UnitQuaternion(*rng.normal(size=4))
        out = compose_compliant_pose(scaled, q_des, tool_pos, tool_rot, AdmittanceState.zero())
        assert np.abs(out.position - (tool_pos + tool_rot.matrix @ scaled)).max() < 1e-12
        assert abs(abs(sum(a * b for a, b in zip(out.orientation.as_array(), q_des.as_array()))) - 1.0) < 1e-12

    def test_transform_composition_oracle(self):
        rng = np.random.default_rng(43)
        for _ in range(300):
            tool_rot = random_rotation(rng)
            tool_pos = rng.normal(size=3)
            scaled = rng.normal(size=3) * 0.01
            q_des = UnitQuaternion(*rng.normal(size=4))
            offset_pos = rng.normal(size=3) * 0.005
            offset_ori = rng.normal(size=3) * 0.05
            state = AdmittanceState(offset_pos, offset_ori, Twist.zero(), np.zeros(6))
            out = compose_compliant_pose(scaled, q_des, tool_pos, tool_rot, state)
            # oracle: full homogeneous-transform composition
            base_ref = Pose(tool_pos + tool_rot.matrix @ scaled, q_des)
            offset = Pose(offset_pos, quat_from_rotvec(offset_ori))
            oracle = compose(transform_from_pose(base_ref), transform_from_pose(offset))
            assert np.abs(out.position - oracle.translation).max() < 1e-12
            got_rot = quat_to_rotation(out.orientation)
            assert np.abs(got_rot.matrix - oracle.rotation.matrix).max() < 1e-12


class TestApplySafety:
    MEASURED = Pose([0.1, 0.0, 0.0], UnitQuaternion.identity())

    def test_passthrough_trace(self):
        candidate = Pose([0.105, 0.0, 0.0], UnitQuaternion.identity())
        pose, ev = apply_safety(candidate, self.MEASURED, None, 1.0, SAFETY, False)
        assert pose is candidate
        assert ev == type(ev)(False, False, False)

    def test_stale_hold_trace(self):
        last = Pose([0.102, 0.0, 0.0], UnitQuaternion.identity())
        # hand-written trace: candidate missing twice, then fresh again
        pose1, ev1 = apply_safety(None, self.MEASURED, last, 0.0, SAFETY, False)
        assert pose1 is last and ev1.stale_reference
        pose2, ev2 = apply_safety(None, self.MEASURED, last, 0.0, SAFETY, False)
        assert pose2 is last and ev2.stale_reference
        fresh = Pose([0.103, 0.0, 0.0], UnitQuaternion.identity())
        pose3, ev3 = apply_safety(fresh, self.MEASURED, last, 0.0, SAFETY, False)
        assert pose3 is fresh and not ev3.stale_reference
        # no prior command at all: hold the measured pose
        pose4, ev4 = apply_safety(None, self.MEASURED, None, 0.0, SAFETY, False)
        assert pose4 is self.MEASURED and ev4.stale_reference

    def test_translation_clamp_trace(self):
        cfg = replace(SAFETY, max_translation_deviation=0.01)
        candidate = Pose([0.15, 0.0, 0.0], UnitQuaternion.identity())  # 5 cm away
        pose, ev = apply_safety(candidate, self.MEASURED, None, 0.0, cfg, False)
        assert pose is self.MEASURED
        assert ev.deviation_clamped and not ev.emergency_active

    def test_rotation_clamp_trace(self):
        candidate = Pose([0.1, 0.0, 0.0], quat_from_rotvec([0.6, 0.0, 0.0]))
        pose, ev = apply_safety(candidate, self.MEASURED, None, 0.0, SAFETY, False)
        assert pose is self.MEASURED and ev.deviation_clamped

    def test_emergency_hysteresis_trace(self):
        candidate = Pose([0.101, 0.0, 0.0], UnitQuaternion.identity())
        th, rel = SAFETY.force_threshold, SAFETY.force_release
        # exact state-machine trace: (force, expected_latched, expected_pose_is_measured)
        trace = [
            (0.0, False, False),
            (th + 1.0, True, True),
            (th - 0.1, True, True),   # below entry, above release: stays latched
            (rel + 0.1, True, True),
            (rel - 0.1, False, False),  # below release: cleared
            (th - 0.1, False, False),   # re-entry requires crossing the threshold
            (th + 0.5, True, True),
        ]
        latched = False
        for force, want_latched, want_measured in trace:
            pose, ev = apply_safety(candidate, self.MEASURED, None, force, SAFETY, latched)
            latched = ev.emergency_active
            assert latched == want_latched, f"force={force}"
            assert (pose is self.MEASURED) == want_measured

    def test_emergency_never_commands_other_pose(self):
        rng = np.random.default_rng(51)
        latched = True
        for _ in range(100):
            candidate = Pose(self.MEASURED.position + rng.normal(size=3) * 0.001, UnitQuaternion.identity())
            force = rng.uniform(SAFETY.force_release, SAFETY.force_threshold + 5)
            pose, ev = apply_safety(candidate, self.MEASURED, None, force, SAFETY, latched)
            latched = ev.emergency_active
            assert not latched or pose is self.MEASURED


class TestControllerTick:
    @staticmethod
    def make(safety=SAFETY) -> InteractionController:
        return InteractionController(DEFAULT_PARAMS, safety, T_S)

    def test_free_space_passthrough(self):
        ctl = self.make()
        measured = Pose([0.1, 0.2, 0.3], UnitQuaternion.identity())
        out = ctl.tick(measured, measured, Wrench.zero())
        assert np.abs(out.commanded.position - measured.position).max() < 1e-12
        assert np.abs(out.error.position).max() < 1e-12
        assert out.events == type(out.events)(False, False, False)

    def test_stale_input_repeats_command(self):
        ctl = self.make()
        measured = Pose([0.1, 0.0, 0.0], UnitQuaternion.identity())
        desired = Pose([0.101, 0.0, 0.0], UnitQuaternion.identity())
        first = ctl.tick(desired, measured, Wrench.zero())
        outs = [ctl.tick(None, measured, Wrench.zero()) for _ in range(100)]
        for out in outs:
            assert out.events.stale_reference
            assert np.abs(out.commanded.position - first.commanded.position).max() < 1e-12

    def test_limiter_off_reduces_to_plain_admittance(self):
        loose = SafetyConfig(
            scaling_gain=0.0,
            force_threshold=1e9,
            force_release=1e8,
            max_translation_deviation=1e9,
            max_rotation_deviation=3.0,
        )
        ctl = self.make(loose)
        rng = np.random.default_rng(61)
        measured = Pose([0.0, 0.0, 0.0], UnitQuaternion.identity())
        desired = Pose([0.002, 0.001, 0.0], UnitQuaternion.identity())

        # reference pipeline without limiter and safety: pure admittance tracking
        model = AdmittanceModel(DEFAULT_PARAMS, T_S)
        state = AdmittanceState.zero()
        for k in range(200):
            force = np.array([2.0, 0.0, 0.0]) * math.sin(0.1 * k)
            wrench = Wrench(force)
            out = ctl.tick(desired, measured, wrench)
            state = model.step(state, wrench)
            expected_pos = desired.position + state.offset_pos
            assert np.abs(out.commanded.position - expected_pos).max() < 1e-12

    def test_emergency_commands_measured_until_release(self):
        ctl = self.make()
        measured = Pose([0.0, 0.0, 0.0], UnitQuaternion.identity())
        desired = Pose([0.001, 0.0, 0.0], UnitQuaternion.identity())
        out = ctl.tick(desired, measured, Wrench([16.0, 0.0, 0.0]))
        assert out.events.emergency_active
        assert np.abs(out.commanded.position - measured.position).max() == 0.0
        out = ctl.tick(desired, measured, Wrench([13.0, 0.0, 0.0]))  # above release
        assert out.events.emergency_active
        out = ctl.tick(desired, measured, Wrench([11.0, 0.0, 0.0]))  # below release
        assert not out.events.emergency_active

    def test_penetration_is_unscaled_reference_norm(self):
        ctl = self.make()
        measured = Pose([0.0, 0.0, 0.0], UnitQuaternion.identity())
        desired = Pose([0.0, 0.0, 0.004], UnitQuaternion.identity())
        out = ctl.tick(desired, measured, Wrench([0.0, 0.0, 8.0]))
        assert abs(out.virtual_penetration - 0.004) < 1e-12
        assert np.linalg.norm(out.scaled_reference_tool) < 0.004
