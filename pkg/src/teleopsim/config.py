"""Declarative scenario configuration.

A scenario is described by one JSON document covering the world (follower,
contact surfaces, stylus script, tremor), every controller parameter block,
and the run metadata (scenario id, seed, duration). Missing keys fall back
to the documented defaults; the merged document is validated against
``SCENARIO_SCHEMA`` and schema violations are reported with their JSON
path.

Scenario ids select the force-limitation mode: scenario "A" runs with the
reference limiter disabled (the scaling gain is forced to zero), scenario
"B" runs with the configured gain.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .admittance import AdmittanceParams, InteractionController, SafetyConfig
from .eye_hand import EyeHandController, FrameConfig, ScalingMatrix
from .haptic_feedback import HapticFeedbackController, HapticFeedbackParams
from .se3 import Pose, Rotation3, UnitQuaternion
from .world import (
    FollowerModel,
    LeaderScript,
    PlaneSurface,
    SphereSurface,
    TeleopSession,
    TremorComponent,
    TremorSpec,
    Waypoint,
)


class ConfigError(ValueError):
    """Invalid scenario configuration; the message carries the JSON path."""


_VEC3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_VEC4 = {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4}
_VEC6 = {"type": "array", "items": {"type": "number"}, "minItems": 6, "maxItems": 6}
_MAT3 = {
    "type": ["array", "null"],
    "items": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
    "minItems": 3,
    "maxItems": 3,
}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["scenario", "seed", "duration_s"],
    "properties": {
        "scenario": {"enum": ["A", "B"]},
        "seed": {"type": "integer", "minimum": 0},
        "duration_s": {"type": "number", "exclusiveMinimum": 0},
        "control": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "period_s": {"type": "number", "exclusiveMinimum": 0},
                "pose_window": {"type": "integer", "minimum": 1},
                "force_window": {"type": "integer", "minimum": 1},
                "translation_scaling": _VEC3,
                "engagement_tolerance_rad": {"type": "number", "exclusiveMinimum": 0},
                "engagement_hold_s": {"type": "number", "minimum": 0},
                "compensate_viewing_angle": {"type": "boolean"},
                "frames": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "leader_base_to_robot_base": _MAT3,
                        "stylus_to_tool": _MAT3,
                        "tool_to_stylus": _MAT3,
                    },
                },
            },
        },
        "admittance": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mass": _VEC6,
                "stiffness": _VEC6,
                "damping": {"oneOf": [{"type": "null"}, _VEC6]},
            },
        },
        "safety": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "reference_scaling_gain": {"type": "number", "minimum": 0},
                "force_threshold": {"type": "number", "exclusiveMinimum": 0},
                "force_release": {"type": "number", "exclusiveMinimum": 0},
                "max_translation_deviation": {"type": "number", "exclusiveMinimum": 0},
                "max_rotation_deviation": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "haptic": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "stiffness": _VEC3,
                "damping": _VEC3,
                "max_force": {"type": "number", "exclusiveMinimum": 0},
                "dead_band": {"type": "number", "minimum": 0},
            },
        },
        "world": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "follower": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "position": _VEC3,
                        "orientation": _VEC4,
                        "max_linear_speed": {"type": "number", "exclusiveMinimum": 0},
                        "max_angular_speed": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
                "surfaces": {
                    "type": "array",
                    "items": {
                        "oneOf": [
                            {
                                "type": "object",
                                "additionalProperties": False,
                                "required": ["type", "point", "normal", "stiffness"],
                                "properties": {
                                    "type": {"const": "plane"},
                                    "point": _VEC3,
                                    "normal": _VEC3,
                                    "stiffness": {"type": "number", "exclusiveMinimum": 0},
                                    "damping": {"type": "number", "minimum": 0},
                                },
                            },
                            {
                                "type": "object",
                                "additionalProperties": False,
                                "required": ["type", "center", "radius", "stiffness"],
                                "properties": {
                                    "type": {"const": "sphere"},
                                    "center": _VEC3,
                                    "radius": {"type": "number", "exclusiveMinimum": 0},
                                    "stiffness": {"type": "number", "exclusiveMinimum": 0},
                                    "damping": {"type": "number", "minimum": 0},
                                },
                            },
                        ]
                    },
                },
                "tremor": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "components": {
                            "type": "array",
                            "items": {
                                "type": "object",
                                "additionalProperties": False,
                                "required": ["amplitude", "frequency_hz"],
                                "properties": {
                                    "amplitude": {"type": "number", "minimum": 0},
                                    "frequency_hz": {"type": "number", "exclusiveMinimum": 0},
                                    "phase": {"type": "number"},
                                    "axis": _VEC3,
                                },
                            },
                        },
                        "noise_std": {"type": "number", "minimum": 0},
                    },
                },
                "script": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["time", "position"],
                        "properties": {
                            "time": {"type": "number", "minimum": 0},
                            "position": _VEC3,
                            "orientation": _VEC4,
                            "interpolation": {"enum": ["linear", "hold"]},
                        },
                    },
                },
            },
        },
        "assessment": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "properties": {
                "min_dominance": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "max_leakage": {"type": "number", "minimum": 0, "maximum": 1},
                "phases": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["name", "start_s", "end_s", "expected_axis"],
                        "properties": {
                            "name": {"type": "string"},
                            "start_s": {"type": "number", "minimum": 0},
                            "end_s": {"type": "number", "exclusiveMinimum": 0},
                            "expected_axis": {"enum": ["x", "y", "z"]},
                        },
                    },
                },
            },
        },
    },
}


DEFAULT_CONFIG: dict = {
    "scenario": "B",
    "seed": 0,
    "duration_s": 20.0,
    "control": {
        "period_s": 0.008,
        "pose_window": 16,
        "force_window": 8,
        "translation_scaling": [0.5, 0.5, 0.5],
        "engagement_tolerance_rad": 0.02,
        "engagement_hold_s": 0.5,
        "compensate_viewing_angle": True,
        "frames": {
            "leader_base_to_robot_base": None,
            "stylus_to_tool": None,
            "tool_to_stylus": None,
        },
    },
    "admittance": {
        "mass": [6.0, 6.0, 6.0, 0.15, 0.15, 0.15],
        "stiffness": [1000.0, 1000.0, 1000.0, 10.0, 10.0, 10.0],
        "damping": None,
    },
    "safety": {
        "reference_scaling_gain": 0.3,
        "force_threshold": 15.0,
        "force_release": 12.0,
        "max_translation_deviation": 0.05,
        "max_rotation_deviation": 0.5,
    },
    "haptic": {
        "stiffness": [200.0, 200.0, 200.0],
        "damping": [5.0, 5.0, 5.0],
        "max_force": 3.3,
        "dead_band": 0.1,
    },
    "world": {
        "follower": {
            "position": [0.0, 0.0, 0.05],
            "orientation": [1.0, 0.0, 0.0, 0.0],
            "max_linear_speed": 0.1,
            "max_angular_speed": 1.5,
        },
        "surfaces": [],
        "tremor": {
            "components": [
                {"amplitude": 3e-4, "frequency_hz": 10.0, "phase": 0.0, "axis": [1.0, 0.0, 0.0]},
                {"amplitude": 1.5e-4, "frequency_hz": 8.5, "phase": 1.0, "axis": [0.0, 1.0, 0.0]},
            ],
            "noise_std": 5e-5,
        },
        "script": [
            {"time": 0.0, "position": [0.0, 0.0, 0.0], "orientation": [1.0, 0.0, 0.0, 0.0], "interpolation": "hold"}
        ],
    },
    "assessment": None,
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key in out and isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass(frozen=True)
class AssessmentPhase:
    name: str
    start_s: float
    end_s: float
    expected_axis: str


@dataclass(frozen=True)
class AssessmentSpec:
    phases: tuple[AssessmentPhase, ...]
    min_dominance: float = 0.98
    max_leakage: float = 0.02


@dataclass(frozen=True)
class ScenarioConfig:
    """Parsed, validated scenario; ``raw`` keeps the merged JSON document."""

    scenario: str
    seed: int
    duration_s: float
    period_s: float
    pose_window: int
    force_window: int
    scaling: ScalingMatrix
    engagement_tolerance_rad: float
    engagement_hold_s: float
    frames: FrameConfig
    admittance: AdmittanceParams
    safety: SafetyConfig
    haptic: HapticFeedbackParams
    assessment: AssessmentSpec | None
    raw: dict

    @property
    def tick_count(self) -> int:
        return int(round(self.duration_s / self.period_s))


def _rotation_from_entry(entry) -> Rotation3 | None:
    if entry is None:
        return None
    try:
        return Rotation3(np.array(entry, dtype=float))
    except ValueError as exc:
        raise ConfigError(f"invalid rotation matrix: {exc}") from exc


def parse_config(document: dict) -> ScenarioConfig:
    """Merge over defaults, validate, and build the typed configuration."""
    merged = _deep_merge(DEFAULT_CONFIG, document)
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(merged), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        raise ConfigError(f"{first.json_path}: {first.message}")

    if merged["scenario"] == "A":
        # scenario A is the limiter-off baseline by definition
        merged["safety"]["reference_scaling_gain"] = 0.0

    ctrl = merged["control"]
    frames_doc = ctrl["frames"]
    stylus_to_tool = _rotation_from_entry(frames_doc["stylus_to_tool"])
    tool_to_stylus = _rotation_from_entry(frames_doc["tool_to_stylus"])
    if stylus_to_tool is None and tool_to_stylus is not None:
        stylus_to_tool = tool_to_stylus.transpose()
    if tool_to_stylus is None and stylus_to_tool is not None:
        tool_to_stylus = stylus_to_tool.transpose()
    identity = Rotation3.identity()
    frames = FrameConfig(
        leader_base_to_robot_base=_rotation_from_entry(frames_doc["leader_base_to_robot_base"]) or identity,
        tool_to_stylus=tool_to_stylus or identity,
        stylus_to_tool=stylus_to_tool or identity,
        compensate_viewing_angle=ctrl["compensate_viewing_angle"],
    )

    adm = merged["admittance"]
    try:
        if adm["damping"] is None:
            admittance = AdmittanceParams.critically_damped(adm["mass"], adm["stiffness"])
        else:
            admittance = AdmittanceParams(adm["mass"], adm["damping"], adm["stiffness"])
        safety_doc = merged["safety"]
        safety = SafetyConfig(
            scaling_gain=safety_doc["reference_scaling_gain"],
            force_threshold=safety_doc["force_threshold"],
            force_release=safety_doc["force_release"],
            max_translation_deviation=safety_doc["max_translation_deviation"],
            max_rotation_deviation=safety_doc["max_rotation_deviation"],
        )
        hap = merged["haptic"]
        haptic = HapticFeedbackParams(hap["stiffness"], hap["damping"], hap["max_force"], hap["dead_band"])
        scaling = ScalingMatrix(*ctrl["translation_scaling"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    assessment = None
    if merged["assessment"] is not None:
        doc = merged["assessment"]
        phases = tuple(
            AssessmentPhase(p["name"], p["start_s"], p["end_s"], p["expected_axis"])
            for p in doc["phases"]
        )
        assessment = AssessmentSpec(
            phases=phases,
            min_dominance=doc.get("min_dominance", 0.98),
            max_leakage=doc.get("max_leakage", 0.02),
        )

    return ScenarioConfig(
        scenario=merged["scenario"],
        seed=merged["seed"],
        duration_s=merged["duration_s"],
        period_s=ctrl["period_s"],
        pose_window=ctrl["pose_window"],
        force_window=ctrl["force_window"],
        scaling=scaling,
        engagement_tolerance_rad=ctrl["engagement_tolerance_rad"],
        engagement_hold_s=ctrl["engagement_hold_s"],
        frames=frames,
        admittance=admittance,
        safety=safety,
        haptic=haptic,
        assessment=assessment,
        raw=merged,
    )


def load_config(path) -> ScenarioConfig:
    try:
        document = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(document, dict):
        raise ConfigError("$: config root must be an object")
    return parse_config(document)


def build_script(cfg: ScenarioConfig) -> LeaderScript:
    wdoc = cfg.raw["world"]
    tremor_doc = wdoc["tremor"]
    tremor = TremorSpec(
        components=tuple(
            TremorComponent(
                c["amplitude"],
                c["frequency_hz"],
                c.get("phase", 0.0),
                tuple(c.get("axis", (1.0, 0.0, 0.0))),
            )
            for c in tremor_doc["components"]
        ),
        noise_std=tremor_doc["noise_std"],
        seed=cfg.seed,
    )
    waypoints = tuple(
        Waypoint(
            time=w["time"],
            pose=Pose(
                np.array(w["position"], dtype=float),
                UnitQuaternion(*w.get("orientation", (1.0, 0.0, 0.0, 0.0))),
            ),
            interpolation=w.get("interpolation", "linear"),
        )
        for w in wdoc["script"]
    )
    try:
        return LeaderScript(waypoints, tremor)
    except ValueError as exc:
        raise ConfigError(f"$.world.script: {exc}") from exc


def build_session(cfg: ScenarioConfig) -> TeleopSession:
    """Instantiate the full control stack for one session (not yet engaged)."""
    wdoc = cfg.raw["world"]
    fdoc = wdoc["follower"]
    follower = FollowerModel(
        Pose(np.array(fdoc["position"], dtype=float), UnitQuaternion(*fdoc["orientation"])),
        max_linear_speed=fdoc["max_linear_speed"],
        max_angular_speed=fdoc["max_angular_speed"],
    )
    surfaces = []
    for s in wdoc["surfaces"]:
        if s["type"] == "plane":
            surfaces.append(PlaneSurface(s["point"], s["normal"], s["stiffness"], s.get("damping", 0.0)))
        else:
            surfaces.append(SphereSurface(s["center"], s["radius"], s["stiffness"], s.get("damping", 0.0)))
    eye_hand = EyeHandController(
        cfg.frames,
        cfg.scaling,
        cfg.period_s,
        pose_window=cfg.pose_window,
        engagement_tolerance=cfg.engagement_tolerance_rad,
    )
    interaction = InteractionController(
        cfg.admittance, cfg.safety, cfg.period_s, force_window=cfg.force_window
    )
    feedback = HapticFeedbackController(cfg.haptic, cfg.frames)
    return TeleopSession(eye_hand, interaction, feedback, follower, surfaces, cfg.period_s)


# ---------------------------------------------------------------------------
# canned scenario builders
# ---------------------------------------------------------------------------

# three stand-in teeth of increasing stiffness sitting on a base plane
_STANDIN_SPHERES = (
    {"center": [0.05, 0.0, 0.0], "radius": 0.008, "stiffness": 2000.0},
    {"center": [0.0, 0.05, 0.0], "radius": 0.008, "stiffness": 5000.0},
    {"center": [-0.05, 0.0, 0.0], "radius": 0.008, "stiffness": 10000.0},
)


def dental_standin_config(scenario: str, sphere_index: int, trial: int, seed: int) -> dict:
    """Press-and-hold run against one stand-in tooth.

    The stylus descends until the commanded reference sits a few
    millimetres below the dome top, holds there quasi-statically, then
    retracts. Trials differ in commanded depth and noise seed.
    """
    if sphere_index not in (0, 1, 2):
        raise ValueError("sphere_index must be 0, 1, or 2")
    sphere = _STANDIN_SPHERES[sphere_index]
    dome_top = sphere["center"][2] + sphere["radius"]
    clearance = 0.02
    depth = 0.004 + 0.001 * trial
    gamma = 0.5
    # stylus travel is the robot travel divided by the translation gain
    dz = -(clearance + depth) / gamma
    script = [
        {"time": 0.0, "position": [0.0, 0.0, 0.0], "interpolation": "hold"},
        {"time": 1.0, "position": [0.0, 0.0, 0.0], "interpolation": "linear"},
        {"time": 4.0, "position": [0.0, 0.0, dz], "interpolation": "hold"},
        {"time": 14.0, "position": [0.0, 0.0, dz], "interpolation": "linear"},
        {"time": 17.0, "position": [0.0, 0.0, 0.0], "interpolation": "hold"},
    ]
    surfaces = [
        {"type": "plane", "point": [0.0, 0.0, 0.0], "normal": [0.0, 0.0, 1.0], "stiffness": 4000.0, "damping": 20.0}
    ]
    for s in _STANDIN_SPHERES:
        surfaces.append({"type": "sphere", "damping": 20.0, **s})
    start = [sphere["center"][0], sphere["center"][1], dome_top + clearance]
    return {
        "scenario": scenario,
        "seed": seed,
        "duration_s": 20.0,
        "control": {"translation_scaling": [gamma, gamma, gamma]},
        "world": {
            "follower": {"position": start, "orientation": [1.0, 0.0, 0.0, 0.0]},
            "surfaces": surfaces,
            "script": script,
        },
    }


def eyehand_assessment_config(seed: int = 7) -> dict:
    """Free-space axis-correspondence check.

    The follower starts with the camera axis horizontal. Phase 1 translates
    the stylus along the leader-base x axis with zero camera roll; phase 2
    rolls the stylus (and thus the camera) by -pi/2 about its z axis; phase
    3 repeats the same translation, which must now surface on the robot
    base z axis.
    """
    half = 0.7071067811865476
    roll_quat = [half, 0.0, 0.0, -half]  # -pi/2 about stylus z
    start_ori = [half, -half, 0.0, 0.0]  # -pi/2 about robot base x
    script = [
        {"time": 0.0, "position": [0.0, 0.0, 0.0], "interpolation": "hold"},
        {"time": 1.0, "position": [0.0, 0.0, 0.0], "interpolation": "linear"},
        {"time": 5.0, "position": [0.06, 0.0, 0.0], "interpolation": "hold"},
        {"time": 6.0, "position": [0.06, 0.0, 0.0], "interpolation": "linear"},
        {
            "time": 9.0,
            "position": [0.06, 0.0, 0.0],
            "orientation": roll_quat,
            "interpolation": "hold",
        },
        {"time": 10.0, "position": [0.06, 0.0, 0.0], "orientation": roll_quat, "interpolation": "linear"},
        {"time": 14.0, "position": [0.12, 0.0, 0.0], "orientation": roll_quat, "interpolation": "hold"},
    ]
    return {
        "scenario": "A",
        "seed": seed,
        "duration_s": 15.0,
        "world": {
            "follower": {"position": [0.3, 0.0, 0.3], "orientation": start_ori},
            "surfaces": [],
            "script": script,
        },
        "assessment": {
            "min_dominance": 0.98,
            "max_leakage": 0.02,
            "phases": [
                {"name": "roll-0-translate-x", "start_s": 1.0, "end_s": 6.0, "expected_axis": "x"},
                {"name": "roll-minus-90-translate-x", "start_s": 10.0, "end_s": 15.0, "expected_axis": "z"},
            ],
        },
    }
