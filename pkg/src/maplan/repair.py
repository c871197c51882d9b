"""Repairing a multi-agent plan after an execution failure.

Four strategies share one signature ``strategy(rp, limits) -> RepairOutcome``:

* ``replan``: plan from the failed state to the goal from scratch;
* ``back_on_track``: plan back to any state of the original plan's nominal
  trace, then reuse the original plan from there;
* ``simple_lazy``: run what still runs of the original plan (the executable
  remainder), then plan from wherever that ends;
* ``repeated_lazy``: lazy repair that, on a later failure inside a preserved
  remainder, repairs against the original plan instead of the patched one.
"""
from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field

from .coordination import MessageLedger
from .errors import Irreparable, Unsolvable
from .local import SearchStats
from .model import EPS, JointAction, Plan, Problem, State, apply_joint, diff
from .planner import Limits, PlanningOutcome, ma_plan

STRATEGIES = ("replan", "bot", "lazy", "repeated-lazy")


@dataclass(frozen=True)
class RepairProblem:
    """A failure of ``plan`` (started in ``start``) before step ``failed_step``.

    ``failed_step`` ranges over ``1..len(plan) + 1``; the last value means the
    plan ran out without reaching the goal.
    """

    problem: Problem
    plan: Plan
    failed_state: State
    failed_step: int
    start: State | None = None
    trace: tuple = field(init=False, compare=False)

    def __post_init__(self):
        if not self.failed_state.defined:
            raise ValueError("failed state must be defined")
        if not 1 <= self.failed_step <= len(self.plan) + 1:
            raise ValueError(f"failed step {self.failed_step} outside 1..{len(self.plan) + 1}")
        start = self.problem.init if self.start is None else self.start
        object.__setattr__(self, "start", start)
        trace = tuple(self.plan.trace(start))
        if not trace[-1].defined:
            raise ValueError("original plan is not executable from its start state")
        object.__setattr__(self, "trace", trace)


@dataclass
class RepairOutcome:
    plan: Plan
    strategy: str
    ledger: MessageLedger
    stats: SearchStats
    wall_time: float
    tag: str = "ok"
    preserved: int = 0  # bot: index where the reused suffix starts; lazy: remainder length
    head: Plan | None = None  # bot: the back plan; lazy: the remainder
    tail: Plan | None = None  # bot: the reused suffix; lazy: the new plan after the remainder
    target_index: int | None = None  # bot: the trace index returned to
    nodes: int = 0
    delta_used: int = 0


def _fold(outcomes: list[PlanningOutcome | Exception]) -> tuple[MessageLedger, SearchStats]:
    ledger, stats = MessageLedger(), SearchStats()
    for o in outcomes:
        if o.ledger is not None:
            ledger.merge(o.ledger)
        if o.stats is not None:
            stats.add(o.stats)
    return ledger, stats


def _irreparable(msg: str, failures: list) -> Irreparable:
    ledger, stats = _fold(failures)
    return Irreparable(msg, ledger, stats)


def replan(rp: RepairProblem, limits: Limits | None = None) -> RepairOutcome:
    t0 = time.perf_counter()
    try:
        out = ma_plan(rp.problem, limits, init=rp.failed_state)
    except Unsolvable as exc:
        raise _irreparable("no plan from the failed state", [exc]) from None
    return RepairOutcome(
        out.plan, "replan", out.ledger, out.stats, time.perf_counter() - t0, nodes=out.nodes, delta_used=out.delta_used
    )


def back_on_track(rp: RepairProblem, limits: Limits | None = None) -> RepairOutcome:
    """Return to the latest reachable nominal state ``s_j`` and continue with steps ``j+1..``."""
    t0 = time.perf_counter()
    m = len(rp.plan)
    n = rp.problem.n_agents
    s_f = rp.failed_state
    for j in range(m, -1, -1):
        if rp.trace[j].issubset(s_f):
            suffix = rp.plan.suffix(j + 1)
            return RepairOutcome(
                suffix, "bot", MessageLedger(), SearchStats(), time.perf_counter() - t0,
                preserved=j + 1, head=Plan.empty(n), tail=suffix, target_index=j,
            )
    targets = [rp.trace[j] for j in range(m, -1, -1)]
    try:
        out = ma_plan(rp.problem, limits, init=s_f, targets=targets)
    except Unsolvable as exc:
        first = exc
    else:
        j = m - out.target
        suffix = rp.plan.suffix(j + 1)
        return RepairOutcome(
            out.plan + suffix, "bot", out.ledger, out.stats, time.perf_counter() - t0,
            preserved=j + 1, head=out.plan, tail=suffix, target_index=j, nodes=out.nodes, delta_used=out.delta_used,
        )
    try:
        out = ma_plan(rp.problem, limits, init=s_f)
    except Unsolvable as exc:
        raise _irreparable("no trace state and no goal state reachable", [first, exc]) from None
    ledger, stats = _fold([first, out])
    return RepairOutcome(
        out.plan, "bot", ledger, stats, time.perf_counter() - t0, tag="fallback-replan",
        head=out.plan, tail=Plan.empty(n), nodes=out.nodes, delta_used=out.delta_used,
    )


def executable_remainder(plan: Plan, k: int, s_f: State, problem: Problem | None = None) -> tuple[Plan, State]:
    """Steps ``k..`` of ``plan`` with every part that cannot run replaced by ε."""
    s = s_f
    steps = []
    for j in plan.steps[k - 1 :]:
        parts = [p if p.applicable(s) else EPS for p in j.parts]
        joint = JointAction(parts)
        s = apply_joint(s, joint)
        steps.append(joint)
    return Plan(tuple(steps), plan.agent_count), s


def simple_lazy(rp: RepairProblem, limits: Limits | None = None) -> RepairOutcome:
    t0 = time.perf_counter()
    rem, s_lazy = executable_remainder(rp.plan, rp.failed_step, rp.failed_state, rp.problem)
    try:
        out = ma_plan(rp.problem, limits, init=s_lazy)
    except Unsolvable as exc:
        raise _irreparable("the executable remainder ends where the goal is unreachable", [exc]) from None
    return RepairOutcome(
        rem + out.plan, "lazy", out.ledger, out.stats, time.perf_counter() - t0,
        preserved=len(rem), head=rem, tail=out.plan, nodes=out.nodes, delta_used=out.delta_used,
    )


@dataclass
class LazySession:
    """What repeated lazy repair remembers between failures of one episode.

    ``original`` is the plan whose remainder is being preserved, started in
    ``start``; the plan currently executing is that remainder (taken from
    original step ``k1``, ``rem_len`` steps long) followed by a patch.

    With ``postpone`` the patch is not planned at repair time: execution
    carries on with the bare remainder and ``complete`` plans the patch once
    the remainder has run out.  A failure inside the remainder then discards
    nothing that was ever paid for.
    """

    original: Plan | None = None
    start: State | None = None
    k1: int = 0
    rem_len: int = 0

    def _target(self, rp: RepairProblem) -> tuple[RepairProblem, str]:
        if self.original is not None and rp.failed_step <= self.rem_len:
            k = self.k1 + rp.failed_step - 1
            return RepairProblem(rp.problem, self.original, rp.failed_state, k, self.start), "remainder"
        return rp, "patch" if self.original is not None else "first"

    def repair(self, rp: RepairProblem, limits: Limits | None = None) -> RepairOutcome:
        target, branch = self._target(rp)
        out = simple_lazy(target, limits)
        out.strategy = "repeated-lazy"
        out.tag = branch
        self.original, self.start = target.plan, target.start
        self.k1, self.rem_len = target.failed_step, out.preserved
        return out

    def defer(self, rp: RepairProblem) -> RepairOutcome:
        """Lazy repair whose patch is left for ``complete``; the plan is the bare remainder."""
        t0 = time.perf_counter()
        target, branch = self._target(rp)
        rem, _ = executable_remainder(target.plan, target.failed_step, target.failed_state)
        self.original, self.start = target.plan, target.start
        self.k1, self.rem_len = target.failed_step, len(rem)
        return RepairOutcome(
            rem, "repeated-lazy", MessageLedger(), SearchStats(), time.perf_counter() - t0,
            tag=branch, preserved=len(rem), head=rem, tail=None,
        )

    def complete(self, problem: Problem, s: State, limits: Limits | None = None) -> RepairOutcome:
        """Plan the postponed patch from ``s``, where the remainder ended."""
        t0 = time.perf_counter()
        try:
            out = ma_plan(problem, limits, init=s)
        except Unsolvable as exc:
            raise _irreparable("the executable remainder ends where the goal is unreachable", [exc]) from None
        # the patch now stands alone: a failure in it is repaired against it
        self.original, self.start, self.k1, self.rem_len = out.plan, s, 1, 0
        return RepairOutcome(
            out.plan, "repeated-lazy", out.ledger, out.stats, time.perf_counter() - t0,
            tag="complete", head=Plan.empty(problem.n_agents), tail=out.plan, nodes=out.nodes, delta_used=out.delta_used,
        )


def repeated_lazy(session: LazySession, rp: RepairProblem, limits: Limits | None = None) -> RepairOutcome:
    return session.repair(rp, limits)


class Repairer:
    """Strategy dispatch with per-episode state (only repeated lazy keeps any)."""

    def __init__(self, strategy: str, limits: Limits | None = None, postpone: bool = True):
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
        self.strategy = strategy
        self.limits = limits
        self.session = LazySession()
        self.postpone = postpone and strategy == "repeated-lazy"

    def __call__(self, rp: RepairProblem) -> RepairOutcome:
        if self.strategy == "replan":
            return replan(rp, self.limits)
        if self.strategy == "bot":
            return back_on_track(rp, self.limits)
        if self.strategy == "lazy":
            return simple_lazy(rp, self.limits)
        if self.postpone:
            return self.session.defer(rp)
        return self.session.repair(rp, self.limits)

    def complete(self, problem: Problem, s: State) -> RepairOutcome:
        return self.session.complete(problem, s, self.limits)


def _joint_options(problem: Problem, s: State) -> list[JointAction]:
    per_agent = [[EPS] + [a for a in ag.actions if a.applicable(s)] for ag in problem.agents]
    out = []
    for combo in itertools.product(*per_agent):
        j = JointAction(combo)
        if j.well_formed:
            out.append(j)
    return out


def minimal_repair_oracle(rp: RepairProblem, max_len: int = 8, max_states: int = 4096) -> Plan | None:
    """Brute force over all plans of length ``<= max_len`` from the failed state.

    Returns a plan reaching the goal with the least ``diff`` to the original
    plan, or None when no such plan exists within the bound.  Cost of a plan
    is its per-cell mismatch against the original plus the non-ε cells of the
    original beyond its end, so a shortest-path search over (step, state)
    finds the argmin.
    """
    problem, orig = rp.problem, rp.plan
    n = problem.n_agents
    if max_len > 16:
        raise ValueError("oracle length bound too large")

    def cell_cost(i: int, j: JointAction) -> int:
        return sum(j.parts[a].label != orig.cell(i, a).label for a in range(n))

    tail = [0] * (max(len(orig), max_len) + 2)
    for i in range(len(orig), 0, -1):
        tail[i] = tail[i + 1] + sum(not p.is_eps for p in orig.step(i).parts)

    options: dict[State, list[JointAction]] = {}
    start = rp.failed_state
    dist = {(0, start): 0}
    parent: dict = {(0, start): None}
    seq = itertools.count()
    heap = [(0, next(seq), 0, start)]
    best = None
    while heap:
        c, _, i, s = heapq.heappop(heap)
        if dist.get((i, s), None) != c:
            continue
        if best is not None and c >= best[0]:
            break
        if problem.goal.issubset(s):
            total = c + tail[i + 1]
            if best is None or total < best[0]:
                best = (total, i, s)
        if i == max_len:
            continue
        if s not in options:
            if len(options) >= max_states:
                raise ValueError("oracle state bound exceeded")
            options[s] = _joint_options(problem, s)
        for j in options[s]:
            t = apply_joint(s, j)
            nc = c + cell_cost(i + 1, j)
            key = (i + 1, t)
            if nc < dist.get(key, nc + 1):
                dist[key] = nc
                parent[key] = ((i, s), j)
                heapq.heappush(heap, (nc, next(seq), i + 1, t))
    if best is None:
        return None
    steps = []
    node = parent[(best[1], best[2])]
    while node is not None:
        prev, j = node
        steps.append(j)
        node = parent[prev]
    steps.reverse()
    return Plan(tuple(steps), n)


def oracle_diff(rp: RepairProblem, max_len: int = 8) -> int | None:
    p = minimal_repair_oracle(rp, max_len)
    return None if p is None else diff(rp.plan, p)
