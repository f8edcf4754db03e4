"""Command-line surface.

Each verb runs the shared pipeline up to its stage, reading the common INI
config (``--config`` flag or ``ROADSLICE_CONFIG`` env var).  ``orchestrate``
additionally accepts a standalone instance file for solver-only use.

Exit codes: 0 success, 1 usage error, 2 stage failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import load_config
from .errors import RoadSliceError, StageError
from .orchestrator import load_instance, save_plan, solve, validate_plan
from .pipeline import run_stages

VERB_STAGE = {
    "gen": "dataset",
    "train-ae": "train-ae",
    "train-localizer": "train-localizer",
    "detect": "evaluate",
    "classify": "detect-classify",
    "orchestrate": "orchestrate",
    "schedule": "schedule",
    "eval": "evaluate",
    "pipeline": None,  # all stages
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roadslice",
        description="Road-event detection from RAN monitoring plus emergency "
                    "slice orchestration.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in VERB_STAGE:
        p = sub.add_parser(verb)
        p.add_argument("--config", default=None,
                       help="INI config path (or set ROADSLICE_CONFIG)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out-dir", default=None)
        if verb == "orchestrate":
            p.add_argument("--instance", default=None,
                           help="solve a serialized instance file directly")
            p.add_argument("--plan-out", default="plan.json")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0

    config_path = args.config or os.environ.get("ROADSLICE_CONFIG")
    try:
        config = load_config(config_path)
    except (OSError, ValueError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        config.seed = args.seed
    if args.out_dir is not None:
        config.out_dir = args.out_dir

    if args.verb == "orchestrate" and args.instance is not None:
        try:
            instance = load_instance(args.instance)
            plan = solve(instance, node_limit=config.orchestrator.node_limit)
            report = validate_plan(plan, instance)
            save_plan(plan, args.plan_out)
            print(json.dumps({
                "objective": plan.objective,
                "status": plan.status,
                "feasible": report.ok,
                "plan": args.plan_out,
            }, indent=2))
            return 0
        except (OSError, ValueError, KeyError, RoadSliceError) as exc:
            print(f"error: solver failed: {exc}", file=sys.stderr)
            return 2

    try:
        manifest, _ = run_stages(config, upto=VERB_STAGE[args.verb])
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(manifest["report"], indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
