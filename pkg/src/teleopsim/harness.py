"""Scenario runner, log persistence, and the comparison battery.

Logs are JSON Lines, one record per control tick, with the fixed field set
documented by ``teleopsim.world.record_to_obj``: t, force_norm,
penetration, desired/commanded/measured poses (position + scalar-first
quaternion), viewing_angle, the three safety flags, and the rendered
feedback force. Runs are pure functions of (config, seed): repeating one
reproduces the log field for field.

Scripted runs and replayed pose streams share a single execution path, so
a live session's recorded inbound stream replays to an identical log.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, build_script, build_session
from .se3 import Pose
from .stats import BinStats, bin_conditional_stats, cohens_d, levene_test, welch_t
from .world import LeaderScript, LogRecord, leader_sample, record_from_obj, record_to_obj

_AXES = {"x": 0, "y": 1, "z": 2}


def write_log(records, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for r in records:
            fh.write(json.dumps(record_to_obj(r), separators=(",", ":")))
            fh.write("\n")


def read_log(path) -> list[LogRecord]:
    records = []
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(record_from_obj(json.loads(line)))
    return records


def scripted_pose_stream(cfg: ScenarioConfig) -> tuple[Pose, list[Pose]]:
    """Engagement latch pose plus one stylus pose per control tick."""
    script = build_script(cfg)
    latch = script.sample_nominal(0.0)
    poses = [leader_sample(script, k * cfg.period_s) for k in range(cfg.tick_count)]
    return latch, poses


def replay_poses(cfg: ScenarioConfig, latch: Pose, poses) -> list[LogRecord]:
    """Run a session over an explicit per-tick stylus pose stream."""
    session = build_session(cfg)
    session.engage(latch)
    return [session.tick(pose, k * cfg.period_s) for k, pose in enumerate(poses)]


def run_scenario(cfg: ScenarioConfig) -> list[LogRecord]:
    """Deterministic scripted run of one scenario."""
    latch, poses = scripted_pose_stream(cfg)
    return replay_poses(cfg, latch, poses)


# ---------------------------------------------------------------------------
# scenario comparison
# ---------------------------------------------------------------------------

def contact_samples(records, b_min: float, b_max: float):
    """Force and penetration arrays restricted to the binned penetration range.

    Zero-penetration free-flight samples are excluded from the pooled
    two-sample tests; the per-bin table still covers the full range.
    """
    a = np.array([r.force_norm for r in records])
    b = np.array([r.penetration for r in records])
    mask = (b > max(b_min, 0.0)) & (b <= b_max)
    return a[mask], b[mask]


def compare_scenarios(
    records_a,
    records_b,
    b_min: float = 0.0,
    b_max: float = 0.007,
    b_step: float = 0.0001,
) -> dict:
    """Binned conditional moments plus the two-sample battery, A vs B.

    The test direction is B minus A: negative t / d means the second log
    ran at lower force for the same commanded penetration range.
    """
    a_forces = np.array([r.force_norm for r in records_a])
    a_pen = np.array([r.penetration for r in records_a])
    b_forces = np.array([r.force_norm for r in records_b])
    b_pen = np.array([r.penetration for r in records_b])
    bins_a = bin_conditional_stats(a_pen, a_forces, b_min, b_max, b_step)
    bins_b = bin_conditional_stats(b_pen, b_forces, b_min, b_max, b_step)
    sample_a, _ = contact_samples(records_a, b_min, b_max)
    sample_b, _ = contact_samples(records_b, b_min, b_max)
    welch = welch_t(sample_b, sample_a)
    effect = cohens_d(sample_b, sample_a)
    levene = levene_test(sample_b, sample_a)
    return {
        "b_min": b_min,
        "b_max": b_max,
        "b_step": b_step,
        "n_a": int(sample_a.size),
        "n_b": int(sample_b.size),
        "mean_force_a": float(sample_a.mean()) if sample_a.size else None,
        "mean_force_b": float(sample_b.mean()) if sample_b.size else None,
        "welch": {"t": welch.t, "dof": welch.dof, "p": welch.p},
        "cohens_d": {"d": effect.d, "ci95": [effect.ci_low, effect.ci_high]},
        "levene": {"w": levene.w, "p": levene.p},
        "bins_a": _bins_to_obj(bins_a),
        "bins_b": _bins_to_obj(bins_b),
    }


def _bins_to_obj(bins: BinStats) -> dict:
    def clean(arr):
        return [None if np.isnan(v) else float(v) for v in arr]

    return {
        "centers": [float(v) for v in bins.centers],
        "counts": [int(v) for v in bins.counts],
        "means": clean(bins.means),
        "variances": clean(bins.variances),
    }


def bins_csv(report: dict) -> str:
    """Per-bin comparison table of a ``compare_scenarios`` report."""
    lines = ["center_m,count_a,mean_a,count_b,mean_b"]
    ba, bb = report["bins_a"], report["bins_b"]
    for i, center in enumerate(ba["centers"]):
        def fmt(v):
            return "" if v is None else repr(v)

        lines.append(
            f"{center},{ba['counts'][i]},{fmt(ba['means'][i])},{bb['counts'][i]},{fmt(bb['means'][i])}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# eye-hand assessment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseResult:
    name: str
    expected_axis: str
    displacement: tuple[float, float, float]
    dominance: float
    leakage: float
    passed: bool


@dataclass(frozen=True)
class AssessmentReport:
    phases: tuple[PhaseResult, ...]
    final_viewing_angle: float
    passed: bool
    failures: tuple[str, ...]


def _pose_at(records, t: float) -> np.ndarray:
    # measured pose of the record closest to t
    idx = min(range(len(records)), key=lambda i: abs(records[i].t - t))
    return records[idx].measured.position


def run_eyehand_assessment(cfg: ScenarioConfig) -> AssessmentReport:
    """Run the scripted free-space scenario and check per-phase motion axes."""
    if cfg.assessment is None:
        raise ValueError("config has no assessment block")
    records = run_scenario(cfg)
    results = []
    failures = []
    for phase in cfg.assessment.phases:
        start = _pose_at(records, phase.start_s)
        end = _pose_at(records, min(phase.end_s, records[-1].t))
        delta = end - start
        norm = float(np.linalg.norm(delta))
        axis = _AXES[phase.expected_axis]
        dominant = abs(float(delta[axis]))
        dominance = dominant / norm if norm > 0.0 else 0.0
        cross = [abs(float(delta[i])) for i in range(3) if i != axis]
        leakage = max(cross) / dominant if dominant > 0.0 else 1.0
        ok = dominance >= cfg.assessment.min_dominance and leakage < cfg.assessment.max_leakage
        if not ok:
            failures.append(
                f"{phase.name}: dominance {dominance:.4f} along {phase.expected_axis}, leakage {leakage:.4f}"
            )
        results.append(
            PhaseResult(
                name=phase.name,
                expected_axis=phase.expected_axis,
                displacement=(float(delta[0]), float(delta[1]), float(delta[2])),
                dominance=dominance,
                leakage=leakage,
                passed=ok,
            )
        )
    return AssessmentReport(
        phases=tuple(results),
        final_viewing_angle=records[-1].viewing_angle,
        passed=not failures,
        failures=tuple(failures),
    )


def assessment_report_obj(report: AssessmentReport) -> dict:
    return {
        "passed": report.passed,
        "final_viewing_angle": report.final_viewing_angle,
        "failures": list(report.failures),
        "phases": [
            {
                "name": p.name,
                "expected_axis": p.expected_axis,
                "displacement": list(p.displacement),
                "dominance": p.dominance,
                "leakage": p.leakage,
                "passed": p.passed,
            }
            for p in report.phases
        ],
    }
