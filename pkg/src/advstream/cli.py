"""Command line entry point: ``advstream {validate,run,replay,report}``."""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from pathlib import Path

from .runner import SpecError, load_spec, read_results, run_experiment, validate_spec


def _load(args: argparse.Namespace):
    spec = load_spec(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    if args.trials is not None:
        spec.trials = args.trials
    if args.out is not None:
        spec.out = args.out
    return spec


def cmd_validate(args: argparse.Namespace) -> int:
    violations = validate_spec(_load(args))
    for v in violations:
        print(f"violation: {v}")
    if not violations:
        print("ok")
    return 1 if violations else 0


def cmd_run(args: argparse.Namespace) -> int:
    try:
        path = run_experiment(_load(args), args.jobs)
    except SpecError as exc:
        for v in exc.violations:
            print(f"violation: {v}", file=sys.stderr)
        return 1
    print(path)
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    """Rerun the experiment stored in a result file and compare bytes."""
    original = Path(args.out)
    spec, _, _ = read_results(original)
    with tempfile.TemporaryDirectory() as tmp:
        spec.out = str(Path(tmp) / original.name)
        path = run_experiment(spec, args.jobs)
        same = path.read_bytes() == original.read_bytes()
    print("identical" if same else "differs")
    return 0 if same else 1


def cmd_report(args: argparse.Namespace) -> int:
    _, _, summary = read_results(args.out)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="advstream", description="Adaptive streaming separation experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, needs_spec in (
        ("validate", cmd_validate, True),
        ("run", cmd_run, True),
        ("replay", cmd_replay, False),
        ("report", cmd_report, False),
    ):
        p = sub.add_parser(name)
        p.set_defaults(func=fn)
        p.add_argument("--spec", required=needs_spec, help="experiment spec file")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--trials", type=int, help="override the trial count")
        p.add_argument("--out", required=not needs_spec, help="result file path")
        p.add_argument("--jobs", type=int, default=1, help="parallel trial workers")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
