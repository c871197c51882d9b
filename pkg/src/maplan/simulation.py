"""Execute a plan step by step under injected failures, repairing as needed.

The monitor checks the next joint action's preconditions before running
it.  An inapplicable step (a strong failure) triggers the chosen repair
strategy and execution restarts at step 1 of the repaired plan.  A step
whose effects do not all hold afterwards (a weak failure) is only counted.
"""
from __future__ import annotations

import csv
import io
import json
import random
import time
from dataclasses import dataclass, field

from .coordination import MessageLedger
from .errors import Irreparable, LimitExceeded, PlanningFailure, Unsolvable
from .model import EPS, JointAction, Problem, State, Term, apply_joint
from .planner import Limits, PlanningOutcome, ma_plan
from .repair import RepairProblem, Repairer

FAILURE_KINDS = ("none", "action", "perturb")


@dataclass(frozen=True)
class FailureModel:
    kind: str = "none"
    p: float = 0.0
    c: int = 1
    seed: int = 0
    max_drops: int = 1

    def __post_init__(self):
        if self.kind not in FAILURE_KINDS:
            raise ValueError(f"unknown failure kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.kind == "perturb" and self.c < 1:
            raise ValueError("perturbation magnitude c must be >= 1")
        if self.max_drops < 1:
            raise ValueError("max_drops must be >= 1")


def execute_fail(s: State, j: JointAction, model: FailureModel, rng: random.Random, n_atoms: int):
    """Run ``j`` in ``s``; returns (new state, description of the injected failure or None).

    One uniform draw decides whether this step fails, so the random stream
    advances identically whatever the outcome.
    """
    if model.kind == "none":
        return apply_joint(s, j), None
    if rng.random() >= model.p:
        return apply_joint(s, j), None
    if model.kind == "action":
        active = [a for a, part in enumerate(j.parts) if not part.is_eps]
        if not active:
            return apply_joint(s, j), None
        dropped = sorted(rng.sample(active, min(model.max_drops, len(active))))
        j2 = JointAction([EPS if a in dropped else part for a, part in enumerate(j.parts)])
        return apply_joint(s, j2), ("drop", tuple(dropped))
    t = apply_joint(s, j)
    present = sorted(t.terms)
    removed = rng.sample(present, min(model.c, len(present)))
    pos, neg = t.pos, t.neg
    for term in removed:
        if term.negated:
            neg &= ~(1 << term.atom)
        else:
            pos &= ~(1 << term.atom)
    added = []
    for _ in range(model.c):
        code = rng.randrange(2 * n_atoms)
        term = Term(code // 2, bool(code % 2))
        bit = 1 << term.atom
        if term.negated:
            pos &= ~bit
            neg |= bit
        else:
            neg &= ~bit
            pos |= bit
        added.append(term)
    return State(pos, neg), ("perturb", tuple(removed), tuple(added))


@dataclass
class RepairEvent:
    step: int  # position in the plan being executed when it failed
    executed: int  # joint actions executed so far in the episode
    strategy: str
    tag: str
    messages: int
    expansions: int
    plan_length: int
    preserved: int


@dataclass
class EpisodeReport:
    problem: str
    strategy: str
    failure: str
    p: float
    c: int
    seed: int
    execution_length: int = 0
    messages: int = 0
    propose: int = 0
    backtrack: int = 0
    broadcast: int = 0
    initial_messages: int = 0
    planner_expansions: int = 0
    planner_nodes: int = 0
    repairs: int = 0
    weak_failures: int = 0
    injected: int = 0
    reached_goal: bool = False
    cause: str = ""
    planning_wall_time: float = 0.0
    repair_events: list = field(default_factory=list)

    HEADER = (
        "problem", "strategy", "failure", "p", "c", "seed", "execution_length", "messages",
        "propose", "backtrack", "broadcast", "initial_messages", "planner_expansions",
        "planner_nodes", "repairs", "weak_failures", "injected", "reached_goal", "cause",
    )

    def row(self, timing: bool = False) -> list:
        out = [getattr(self, h) for h in self.HEADER]
        out[self.HEADER.index("reached_goal")] = int(self.reached_goal)
        out[self.HEADER.index("p")] = f"{self.p:g}"
        if timing:
            out.append(f"{self.planning_wall_time:.6f}")
        return out

    @classmethod
    def header(cls, timing: bool = False) -> list:
        return list(cls.HEADER) + (["planning_wall_time"] if timing else [])

    def to_csv(self, timing: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header(timing))
        w.writerow(self.row(timing))
        return buf.getvalue()

    def detail_json(self) -> str:
        return "\n".join(json.dumps(e.__dict__, sort_keys=True) for e in self.repair_events)


def run_episode(
    problem: Problem,
    strategy: str,
    model: FailureModel,
    limits: Limits | None = None,
    initial: PlanningOutcome | None = None,
    step_limit: int | None = None,
) -> EpisodeReport:
    """Plan, then execute under ``model`` until the plan runs out or repair gives up.

    ``initial`` lets callers share one initial planning run across episodes;
    its messages and effort are still charged to every episode.
    """
    limits = limits or Limits()
    rep = EpisodeReport(problem.name, strategy, model.kind, model.p, model.c, model.seed)
    ledger = MessageLedger()
    t0 = time.perf_counter()

    def charge(ledger_part, stats, nodes=0):
        if ledger_part is not None:
            ledger.merge(ledger_part)
        if stats is not None:
            rep.planner_expansions += stats.expansions
        rep.planner_nodes += nodes

    def finish():
        rep.messages = ledger.total
        c = ledger.counts()
        rep.propose, rep.backtrack, rep.broadcast = c["Propose"], c["Backtrack"], c["SolutionBroadcast"]
        rep.planning_wall_time = time.perf_counter() - t0
        return rep

    try:
        out = initial if initial is not None else ma_plan(problem, limits)
    except PlanningFailure as exc:
        charge(exc.ledger, exc.stats)
        rep.cause = exc.cause
        return finish()
    charge(out.ledger, out.stats, out.nodes)
    rep.initial_messages = out.ledger.total
    plan = out.plan
    limit = step_limit if step_limit is not None else 20 * len(plan) + 50
    rng = random.Random(model.seed)
    repairer = Repairer(strategy, limits)
    n_atoms = len(problem.atoms)
    s = start = problem.init
    step = 1
    while True:
        if step <= len(plan):
            j = plan.step(step)
            if j.applicable(s):
                if rep.execution_length >= limit:
                    rep.cause = "step-limit"
                    break
                s_next, injected = execute_fail(s, j, model, rng, n_atoms)
                rep.execution_length += 1
                if injected is not None:
                    rep.injected += 1
                if not (State(j.eff_pos, j.eff_neg).issubset(s_next)):
                    rep.weak_failures += 1
                s = s_next
                step += 1
                continue
        elif problem.goal.issubset(s):
            rep.reached_goal = True
            break
        if rep.repairs >= limit:
            rep.cause = "step-limit"
            break
        try:
            if repairer.postpone and step > len(plan):
                fix = repairer.complete(problem, s)
            else:
                fix = repairer(RepairProblem(problem, plan, s, step, start))
        except (Irreparable, Unsolvable) as exc:
            charge(exc.ledger, exc.stats)
            rep.cause = "irreparable"
            break
        except LimitExceeded as exc:
            charge(exc.ledger, exc.stats)
            rep.cause = exc.cause
            break
        charge(fix.ledger, fix.stats, fix.nodes)
        rep.repairs += 1
        rep.repair_events.append(
            RepairEvent(step, rep.execution_length, fix.strategy, fix.tag, fix.ledger.total, fix.stats.expansions, len(fix.plan), fix.preserved)
        )
        plan, start, step = fix.plan, s, 1
    if rep.reached_goal:
        assert problem.goal.issubset(s)
    return finish()
