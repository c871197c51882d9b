"""The outer coordination-level loop and assembly of the final plan."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

from .coordination import (
    DEFAULT_NODE_BUDGET,
    Assignment,
    Bound,
    InternalCheck,
    MessageLedger,
    build_csp,
    solve_discsp,
)
from .errors import LimitExceeded, PlanError, Unsolvable
from .kernels import INF
from .local import DEFAULT_LEG_BUDGET, SearchStats
from .model import EPS, JointAction, Plan, Problem, State, validate_plan


@dataclass(frozen=True)
class Limits:
    max_delta: int = 4
    leg_budget: int = DEFAULT_LEG_BUDGET
    node_budget: int = DEFAULT_NODE_BUDGET
    record_messages: bool = False


@dataclass
class PlanningOutcome:
    plan: Plan
    delta_used: int
    ledger: MessageLedger
    stats: SearchStats
    wall_time: float
    target: int = 0
    nodes: int = 0
    levels: list = field(default_factory=list)  # ledger total after each level


def assemble(assignment: Assignment, segments: Sequence[Sequence[Sequence]], n_agents: int) -> Plan:
    """Lay slot actions and private segments out on a shared timeline.

    ``segments[a][i]`` is agent ``a``'s private run before its ``i+1``-th slot
    action; the last entry follows its final slot action.  Slot ``s`` lands at
    ``T(s) = max(T(s-1) + 1, last(a) + len(run) + 1)`` where ``last(a)`` is
    the step of agent ``a``'s previous slot action.
    """
    cells: dict[tuple[int, int], object] = {}
    last = [0] * n_agents
    used = [0] * n_agents
    t_prev = 0
    for v in assignment.slots:
        if v is None:
            continue
        a = v.agent
        run = segments[a][used[a]]
        t = max(t_prev + 1, last[a] + len(run) + 1)
        for k, act in enumerate(run):
            cells[(last[a] + 1 + k, a)] = act
        cells[(t, a)] = v.action
        last[a] = t
        used[a] += 1
        t_prev = t
    length = t_prev
    for a in range(n_agents):
        run = segments[a][used[a]]
        for k, act in enumerate(run):
            cells[(last[a] + 1 + k, a)] = act
        length = max(length, last[a] + len(run))
    steps = [JointAction([cells.get((i, a), EPS) for a in range(n_agents)]) for i in range(1, length + 1)]
    return Plan(tuple(steps), n_agents)


def _root_bounds(problem: Problem, csp, bound: Bound) -> list[float]:
    out = []
    for split in csp.targets:
        if not split.fixed.issubset(csp.init):
            out.append(INF)
        else:
            out.append(bound(csp.init.pos, split.state.pos))
    return out


def ma_plan(
    problem: Problem,
    limits: Limits | None = None,
    init: State | None = None,
    targets: Sequence[State] | None = None,
) -> PlanningOutcome:
    """Plan from ``init`` (default: the problem's) to the goal or to any of ``targets``.

    Levels run from 0 public actions upward.  Messages and search effort of
    failed levels are kept.  When no target is reachable even in the delete
    relaxation, planning stops after level 0 instead of climbing to
    ``max_delta``.
    """
    limits = limits or Limits()
    t0 = time.perf_counter()
    init = problem.init if init is None else init
    ledger = MessageLedger.recording() if limits.record_messages else MessageLedger()
    checker = InternalCheck(problem, init, limits.leg_budget)
    bound = Bound(problem)
    nodes = 0
    levels = []
    hopeless = False
    for delta in range(limits.max_delta + 1):
        csp = build_csp(problem, delta, targets, init)
        if delta == 0:
            hopeless = all(b == INF for b in _root_bounds(problem, csp, bound))
        try:
            res = solve_discsp(csp, limits.node_budget, checker, bound, limits.record_messages)
        except LimitExceeded as exc:
            ledger.merge(exc.ledger)
            raise LimitExceeded(str(exc), ledger, checker.stats) from None
        ledger.merge(res.ledger)
        nodes += res.nodes
        levels.append(ledger.total)
        if res.satisfied:
            plan = assemble(res.assignment, res.segments, problem.n_agents)
            goal = csp.targets[res.assignment.target].state
            bad = validate_plan(problem.with_goal(goal), plan, init)
            if bad is not None:
                raise PlanError(f"internal error: assembled plan invalid ({bad})")
            stats = checker.stats
            stats.wall_time = time.perf_counter() - t0
            return PlanningOutcome(plan, delta, ledger, stats, stats.wall_time, res.assignment.target, nodes, levels)
        if hopeless:
            break
    stats = checker.stats
    stats.wall_time = time.perf_counter() - t0
    if checker.budget_hit:
        raise LimitExceeded("local search budget exhausted before a plan was found", ledger, stats)
    raise Unsolvable(f"no plan with at most {limits.max_delta} coordination slots", ledger, stats)
