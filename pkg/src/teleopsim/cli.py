"""Command-line interface.

Subcommands: ``run`` executes a scenario and persists its log, ``stats``
compares two logs, ``eyehand`` runs the free-space axis-correspondence
assessment, ``serve`` starts the live session server.

Exit codes: 0 success, 2 configuration error, 3 assertion/analysis failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .harness import (
    assessment_report_obj,
    bins_csv,
    compare_scenarios,
    read_log,
    run_eyehand_assessment,
    run_scenario,
    write_log,
)
from .stats import DegenerateSampleError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSERTION = 3


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    records = run_scenario(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_log(records, out / "log.jsonl")
    contact = sum(1 for r in records if r.force_norm > 0.0)
    summary = {
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "ticks": len(records),
        "duration_s": cfg.duration_s,
        "contact_ticks": contact,
        "max_force": max((r.force_norm for r in records), default=0.0),
        "max_penetration": max((r.penetration for r in records), default=0.0),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary))
    return EXIT_OK


def _cmd_stats(args) -> int:
    records_a = read_log(args.logs[0])
    records_b = read_log(args.logs[1])
    try:
        report = compare_scenarios(records_a, records_b, args.bmin, args.bmax, args.bstep)
    except (DegenerateSampleError, ValueError) as exc:
        print(f"stats failure: {exc}", file=sys.stderr)
        return EXIT_ASSERTION
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report, indent=2))
        (out / "bins.csv").write_text(bins_csv(report))
    summary = {k: report[k] for k in ("n_a", "n_b", "mean_force_a", "mean_force_b", "welch", "cohens_d", "levene")}
    print(json.dumps(summary))
    return EXIT_OK


def _cmd_eyehand(args) -> int:
    cfg = load_config(args.config)
    report = run_eyehand_assessment(cfg)
    obj = assessment_report_obj(report)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eyehand_report.json").write_text(json.dumps(obj, indent=2))
    print(json.dumps(obj))
    if not report.passed:
        for failure in report.failures:
            print(f"assessment failure: {failure}", file=sys.stderr)
        return EXIT_ASSERTION
    return EXIT_OK


def _cmd_serve(args) -> int:
    from .service import TeleopServer

    cfg = load_config(args.config)
    server = TeleopServer(cfg, port=args.port, record_dir=args.record)
    print(f"serving on ws://127.0.0.1:{args.port}")
    server.run_forever()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="teleopsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and write its log")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.set_defaults(func=_cmd_run)

    p_stats = sub.add_parser("stats", help="compare two scenario logs")
    p_stats.add_argument("--logs", nargs=2, required=True, metavar=("LOG_A", "LOG_B"))
    p_stats.add_argument("--bmin", type=float, default=0.0)
    p_stats.add_argument("--bmax", type=float, default=0.007)
    p_stats.add_argument("--bstep", type=float, default=0.0001)
    p_stats.add_argument("--out")
    p_stats.set_defaults(func=_cmd_stats)

    p_eye = sub.add_parser("eyehand", help="run the axis-correspondence assessment")
    p_eye.add_argument("--config", required=True)
    p_eye.add_argument("--out")
    p_eye.set_defaults(func=_cmd_eyehand)

    p_serve = sub.add_parser("serve", help="start the live session server")
    p_serve.add_argument("--config", required=True)
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--record")
    p_serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
