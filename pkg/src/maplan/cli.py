"""Command-line front end: ``maplan plan|episode|sweep|validate``.

Exit codes: 0 success, 1 bad input (parse or usage error), 2 unsolvable or
invalid plan, 3 irreparable, 4 search budget exhausted, 5 step limit hit.
Failures also print ``cause=<name>`` on stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from .benchmarks import FAMILIES, BenchmarkParams, generate_benchmark
from .domainio import load_problem, parse_plan, serialize_plan
from .errors import LimitExceeded, ParseError, PlanError, PlanningFailure
from .experiment import load_sweep, run_sweep, summary_text, read_raw, write_outputs
from .model import Problem, validate_plan
from .planner import Limits, ma_plan
from .repair import STRATEGIES
from .simulation import FAILURE_KINDS, FailureModel, run_episode

EXIT_OK, EXIT_INPUT, EXIT_UNSOLVABLE, EXIT_IRREPARABLE, EXIT_LIMIT, EXIT_STEP_LIMIT = range(6)
PLAN_METRICS = ["problem", "delta_used", "plan_length", "messages", "propose", "backtrack", "broadcast",
                "expansions", "nodes"]


def _problem_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--domain-file", help="ground or schematic problem file")
    src.add_argument("--family", choices=FAMILIES, help="generate a benchmark instance")
    p.add_argument("--agents", type=int, default=3)
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--packages", type=int, default=2)
    p.add_argument("--locations", type=int, default=2)
    p.add_argument("--waypoints", type=int, default=2)
    p.add_argument("--targets", type=int, default=1)
    p.add_argument("--directions", type=int, default=3)


def _limit_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-delta", type=int, default=Limits.max_delta)
    p.add_argument("--budget", type=int, default=Limits.leg_budget, help="expansions per local search")
    p.add_argument("--node-budget", type=int, default=Limits.node_budget, help="coordination search nodes per level")


def _load(args) -> Problem:
    if args.domain_file:
        return load_problem(args.domain_file)
    params = BenchmarkParams(args.family, args.agents, args.packages, args.locations, args.waypoints,
                             args.targets, args.directions, args.seed)
    return generate_benchmark(params)


def _limits(args, record: bool = False) -> Limits:
    return Limits(args.max_delta, args.budget, args.node_budget, record)


def _fail(cause: str, msg: str, code: int) -> int:
    print(f"error: {msg}", file=sys.stderr)
    print(f"cause={cause}", file=sys.stderr)
    return code


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_plan(args) -> int:
    problem = _load(args)
    try:
        out = ma_plan(problem, _limits(args, args.record_messages))
    except LimitExceeded as exc:
        return _fail(exc.cause, str(exc), EXIT_LIMIT)
    except PlanningFailure as exc:
        return _fail(exc.cause, str(exc), EXIT_UNSOLVABLE)
    counts = out.ledger.counts()
    metrics = _csv([PLAN_METRICS, [problem.name, out.delta_used, len(out.plan), out.ledger.total,
                                   counts["Propose"], counts["Backtrack"], counts["SolutionBroadcast"],
                                   out.stats.expansions, out.nodes]])
    _emit(serialize_plan(out.plan, problem), args.out)
    if args.out:
        Path(args.out + ".metrics.csv").write_text(metrics, encoding="utf-8")
        if args.record_messages:
            Path(args.out + ".messages.csv").write_text(out.ledger.to_csv(), encoding="utf-8")
    else:
        sys.stderr.write(metrics)
    return EXIT_OK


def cmd_episode(args) -> int:
    problem = _load(args)
    seed = args.episode_seed if args.episode_seed is not None else args.seed
    model = FailureModel(args.failure, args.p, args.c, seed, args.max_drops)
    report = run_episode(problem, args.strategy, model, _limits(args), step_limit=args.step_limit)
    _emit(report.to_csv(args.timing), args.out)
    if args.verbose and report.repair_events:
        print(report.detail_json(), file=sys.stderr)
    if report.reached_goal:
        return EXIT_OK
    codes = {"irreparable": EXIT_IRREPARABLE, "unsolvable": EXIT_UNSOLVABLE, "step-limit": EXIT_STEP_LIMIT,
             "limit": EXIT_LIMIT, "budget": EXIT_LIMIT}
    return _fail(report.cause or "unknown", "episode did not reach the goal", codes.get(report.cause, EXIT_INPUT))


def cmd_sweep(args) -> int:
    spec = load_sweep(args.spec)
    result = run_sweep(spec, args.jobs)
    paths = write_outputs(result, args.out)
    sys.stdout.write(summary_text(read_raw(result.raw_csv())))
    failed = sum(1 for *_, r in result.rows if not r.reached_goal)
    print(f"{len(result.rows)} episodes, {failed} without goal; outputs in {paths['raw'].parent}", file=sys.stderr)
    return EXIT_OK


def cmd_validate(args) -> int:
    problem = _load(args)
    try:
        plan = parse_plan(Path(args.plan).read_text(encoding="utf-8"), problem)
    except PlanError as exc:
        return _fail("parse", str(exc), EXIT_INPUT)
    bad = validate_plan(problem, plan)
    if bad is None:
        print("valid")
        return EXIT_OK
    print(f"violation kind={bad.kind} step={bad.step} {bad.detail}")
    return EXIT_UNSOLVABLE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maplan", description="Multi-agent planning and plan repair experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan once and write the plan CSV")
    _problem_args(p)
    _limit_args(p)
    p.add_argument("--out", help="plan CSV path; metrics go to OUT.metrics.csv")
    p.add_argument("--record-messages", action="store_true", help="also dump every message (OUT.messages.csv)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("episode", help="execute a plan under failures, repairing as needed")
    _problem_args(p)
    _limit_args(p)
    p.add_argument("--strategy", choices=STRATEGIES, default="repeated-lazy")
    p.add_argument("--failure", choices=FAILURE_KINDS, default="action")
    p.add_argument("--p", type=float, default=0.1, help="failure probability per executed step")
    p.add_argument("--c", type=int, default=1, help="perturbation magnitude")
    p.add_argument("--max-drops", type=int, default=1)
    p.add_argument("--episode-seed", type=int, help="failure seed (default: --seed)")
    p.add_argument("--step-limit", type=int)
    p.add_argument("--timing", action="store_true", help="add the wall-time column")
    p.add_argument("--verbose", action="store_true", help="print one JSON record per repair on stderr")
    p.add_argument("--out", help="report CSV path")
    p.set_defaults(func=cmd_episode)

    p = sub.add_parser("sweep", help="run a sweep spec and write raw/aggregate/summary files")
    p.add_argument("spec")
    p.add_argument("--out", default="sweep-out", help="output directory")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check a plan CSV against a problem")
    _problem_args(p)
    p.add_argument("plan")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors; 0 after --help
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ParseError as exc:
        return _fail("parse", str(exc), EXIT_INPUT)
    except (OSError, ValueError) as exc:
        return _fail("input", str(exc), EXIT_INPUT)


if __name__ == "__main__":
    sys.exit(main())
