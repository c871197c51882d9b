"""Coordination of public actions as a constraint problem.

A level-``delta`` problem has one variable per coordination slot whose
value is a public action of some agent (or a trailing no-op), a derived
support variable per public goal term, and a target variable choosing
which of several alternative goal states to reach (a single alternative
for ordinary planning).

Two constraint families are checked:

* coordination: every public precondition of a slot action holds in the
  public state produced by the initial state and the earlier slots; public
  goal terms hold after the last slot;
* internal: every agent can fill the gaps around its own slot actions with
  private actions and then reach its share of the goal.

``solve_discsp`` runs synchronous backtracking between simulated agents.
A single token carries the partial assignment; every time it changes hands
one message is counted.  The accounting contract is described in
``docs/protocol.md``.
"""
from __future__ import annotations

import csv
import io
import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .errors import BudgetExceeded, LimitExceeded, Unsolvable
from .kernels import RelaxedTask
from .local import DEFAULT_LEG_BUDGET, AgentModel, LegCache, SearchStats
from .model import GroundAction, Problem, State, Term, bits

PROPOSE = "Propose"
BACKTRACK = "Backtrack"
BROADCAST = "SolutionBroadcast"
KINDS = (PROPOSE, BACKTRACK, BROADCAST)
INIT = 0  # goal-support value meaning "already true initially"

DEFAULT_NODE_BUDGET = 200_000


class Message(NamedTuple):
    kind: str
    src: int
    dst: int
    step: int


@dataclass
class MessageLedger:
    by_kind: Counter = field(default_factory=Counter)
    events: list | None = None  # filled only when recording

    @classmethod
    def recording(cls) -> "MessageLedger":
        return cls(events=[])

    @property
    def total(self) -> int:
        return sum(self.by_kind.values())

    def send(self, kind: str, src: int, dst: int, step: int = 0) -> None:
        self.by_kind[kind] += 1
        if self.events is not None:
            self.events.append(Message(kind, src, dst, step))

    def merge(self, other: "MessageLedger") -> None:
        self.by_kind.update(other.by_kind)
        if self.events is not None and other.events is not None:
            self.events.extend(other.events)

    def counts(self) -> dict[str, int]:
        return {k: self.by_kind.get(k, 0) for k in KINDS}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "from", "to", "step"])
        for m in self.events or ():
            w.writerow(m)
        return buf.getvalue()


class SlotValue(NamedTuple):
    agent: int
    action: GroundAction


@dataclass(frozen=True)
class Assignment:
    slots: tuple  # SlotValue or None (no-op) per slot
    goal_support: dict
    target: int = 0

    def landmarks(self, agent: int) -> tuple[GroundAction, ...]:
        return tuple(v.action for v in self.slots if v is not None and v.agent == agent)

    @property
    def used(self) -> int:
        return sum(v is not None for v in self.slots)


@dataclass(frozen=True)
class TargetSplit:
    """One alternative goal state, split by who is responsible for each term."""

    state: State
    public: State  # public goal terms, checked by goal support
    shares: tuple[State, ...]  # per-agent private goal terms
    fixed: State  # terms over atoms no agent touches; must hold initially


class CoordinationCSP:
    def __init__(self, problem: Problem, delta: int, targets: Sequence[State] | None = None, init: State | None = None):
        if delta < 0:
            raise ValueError("delta must be non-negative")
        self.problem = problem
        self.delta = delta
        self.init = problem.init if init is None else init
        st = problem.domain.structure
        self.structure = st
        self.n = problem.n_agents
        self.public_atoms = st.public_atoms
        self.public_actions = st.public_actions
        self.slot_domain = tuple(
            SlotValue(i, a) for i, acts in enumerate(st.public_actions) for a in acts
        ) + (None,)
        targets = [problem.goal] if targets is None else list(targets)
        touched = 0
        for m in st.agent_atoms:
            touched |= m
        self.targets = tuple(self._split(t, touched) for t in targets)

    def _split(self, g: State, touched: int) -> TargetSplit:
        st = self.structure
        shares = tuple(g.restrict(m) for m in st.private_atoms)
        return TargetSplit(g, g.restrict(st.public_atoms), shares, g.restrict(~touched & ((1 << len(self.problem.atoms)) - 1)))

    def goal_support_vars(self, target: int = 0) -> list[Term]:
        return sorted(self.targets[target].public.terms)

    def goal_support_domain(self) -> tuple[int, ...]:
        return tuple(range(self.delta + 1))


def build_csp(problem: Problem, delta: int, targets: Sequence[State] | None = None, init: State | None = None) -> CoordinationCSP:
    return CoordinationCSP(problem, delta, targets, init)


class CoordinationViolation(NamedTuple):
    term: Term | None
    slot: int  # 1-based slot, or delta + 1 for the goal


class InternalViolation(NamedTuple):
    agent: int
    budget: bool = False


def _supporter(slots, before: int, atom: int) -> int | None:
    """Nearest slot (1-based) strictly before ``before`` whose effects mention ``atom``."""
    bit = 1 << atom
    for s in range(before - 1, 0, -1):
        v = slots[s - 1]
        if v is not None and (v.action.eff_pos | v.action.eff_neg) & bit:
            return s
    return None


def _supported(csp: CoordinationCSP, slots, before: int, t: Term) -> int | None:
    """Slot (or INIT) giving ``t`` at the point just before slot ``before``; None if nothing does."""
    s = _supporter(slots, before, t.atom)
    if s is None:
        return INIT if t in csp.init else None
    eff = slots[s - 1].action.eff
    return s if t in eff else None


def derive_goal_support(csp: CoordinationCSP, slots, target: int = 0) -> dict:
    out = {}
    for t in csp.goal_support_vars(target):
        out[t] = _supported(csp, slots, len(slots) + 1, t)
    return out


def check_coordination(assignment: Assignment, csp: CoordinationCSP) -> CoordinationViolation | None:
    """First violated coordination constraint, or None when satisfied."""
    slots = assignment.slots
    if len(slots) != csp.delta:
        return CoordinationViolation(None, 0)
    seen_noop = False
    for s, v in enumerate(slots, 1):
        if v is None:
            seen_noop = True
            continue
        if seen_noop:
            return CoordinationViolation(None, s)
        pub = v.action.restrict(csp.public_atoms)
        for t in sorted(pub.pre.terms):
            if _supported(csp, slots, s, t) is None:
                return CoordinationViolation(t, s)
    split = csp.targets[assignment.target]
    if not split.fixed.issubset(csp.init):
        return CoordinationViolation(min(split.fixed.terms - csp.init.terms), csp.delta + 1)
    for t, sup in derive_goal_support(csp, slots, assignment.target).items():
        if sup is None or assignment.goal_support.get(t, sup) != sup:
            return CoordinationViolation(t, csp.delta + 1)
    return None


class InternalCheck:
    """Leg caches for every agent, shared across levels of one planning run."""

    def __init__(self, problem: Problem, init: State, leg_budget: int = DEFAULT_LEG_BUDGET):
        st = problem.domain.structure
        self.models = tuple(
            AgentModel(ag, st.private_atoms[i], st.private_actions[i]) for i, ag in enumerate(problem.agents)
        )
        self.caches = tuple(LegCache(m, init.restrict(m.scope), leg_budget) for m in self.models)
        self.budget_hit = False

    @property
    def stats(self) -> SearchStats:
        total = SearchStats()
        for c in self.caches:
            total.add(c.stats)
        return total

    def prefix_ok(self, agent: int, landmarks: tuple[GroundAction, ...]) -> bool:
        try:
            self.caches[agent].through(landmarks)
            return True
        except BudgetExceeded:
            self.budget_hit = True
            return False
        except Unsolvable:
            return False

    def segments(self, agent: int, landmarks: tuple[GroundAction, ...], goal: State):
        """Segments for ``agent`` or None; records budget exhaustion."""
        try:
            return self.caches[agent].solve(landmarks, goal)
        except BudgetExceeded:
            self.budget_hit = True
            return None
        except Unsolvable:
            return None


def check_internal(
    assignment: Assignment, csp: CoordinationCSP, budget: int = DEFAULT_LEG_BUDGET, checker: InternalCheck | None = None
) -> InternalViolation | None:
    checker = checker or InternalCheck(csp.problem, csp.init, budget)
    split = csp.targets[assignment.target]
    for a in range(csp.n):
        before = checker.budget_hit
        checker.budget_hit = False
        segs = checker.segments(a, assignment.landmarks(a), split.shares[a])
        hit, checker.budget_hit = checker.budget_hit, before or checker.budget_hit
        if segs is None:
            return InternalViolation(a, hit)
    return None


class Bound:
    """LM-cut estimate of the public actions still needed (private actions free)."""

    def __init__(self, problem: Problem):
        st = problem.domain.structure
        acts = [a for ag in problem.agents for a in ag.actions]
        self.n_atoms = len(problem.atoms)
        self.task = RelaxedTask(
            self.n_atoms,
            [bits(a.pre_pos) for a in acts],
            [bits(a.eff_pos) for a in acts],
            [1 if a.atoms & st.public_atoms else 0 for a in acts],
        )
        self._memo: dict[tuple[int, int], float] = {}

    def __call__(self, relaxed: int, goal_pos: int) -> float:
        missing = goal_pos & ~relaxed
        if not missing:
            return 0
        key = (relaxed, missing)
        v = self._memo.get(key)
        if v is None:
            v = self.task.lmcut(bits(relaxed), bits(missing))
            self._memo[key] = v
        return v


@dataclass
class SolveResult:
    assignment: Assignment | None
    ledger: MessageLedger
    segments: tuple | None  # per agent, tuple of segments
    nodes: int

    @property
    def satisfied(self) -> bool:
        return self.assignment is not None


class _Protocol:
    def __init__(self, csp: CoordinationCSP, checker: InternalCheck, bound: Bound, budget: int, record: bool):
        self.csp = csp
        self.checker = checker
        self.bound = bound
        self.budget = budget
        self.ledger = MessageLedger.recording() if record else MessageLedger()
        self.n = csp.n
        self.holder = 0
        self.nodes = 0
        self.slots: list = []
        self.target = 0
        self.pub_init = csp.init.restrict(csp.public_atoms)

    def tick(self) -> None:
        self.nodes += 1
        if self.nodes > self.budget:
            raise LimitExceeded(f"coordination search exceeded {self.budget} nodes", ledger=self.ledger)

    def pass_token(self, dst: int, kind: str) -> None:
        if dst != self.holder:
            self.ledger.send(kind, self.holder, dst, self.nodes)
            self.holder = dst

    def broadcast(self, kind: str) -> None:
        for dst in range(self.n):
            if dst != self.holder:
                self.ledger.send(kind, self.holder, dst, self.nodes)

    def landmarks(self, agent: int, extra: GroundAction | None = None) -> tuple[GroundAction, ...]:
        lms = tuple(v.action for v in self.slots if v is not None and v.agent == agent)
        return lms + (extra,) if extra is not None else lms

    def run(self) -> SolveResult:
        csp = self.csp
        if csp.delta == 0:
            ok = self.level_zero()
        else:
            ok = self.level()
        if not ok:
            self.holder = 0
            self.broadcast(BACKTRACK)
            return SolveResult(None, self.ledger, None, self.nodes)
        slots = tuple(self.slots) + (None,) * (csp.delta - len(self.slots))
        asg = Assignment(slots, derive_goal_support(csp, slots, self.target), self.target)
        split = csp.targets[self.target]
        segs = tuple(self.checker.segments(a, asg.landmarks(a), split.shares[a]) for a in range(self.n))
        return SolveResult(asg, self.ledger, segs, self.nodes)

    def target_ok(self, split: TargetSplit) -> bool:
        return split.fixed.issubset(self.csp.init)

    def level_zero(self) -> bool:
        """No public action allowed: each agent checks each alternative on its own.

        Every alternative is examined (local work, no messages) and the one
        with the shortest joint plan wins, ties going to the earlier target.
        As on any level-0 success, nothing needs to be sent.
        """
        best = None
        for t, split in enumerate(self.csp.targets):
            self.tick()
            if not self.target_ok(split) or not split.public.issubset(self.pub_init):
                continue
            if self.bound(self.csp.init.pos, split.state.pos) > 0:
                continue
            length = 0
            for a in range(self.n):
                segs = self.checker.segments(a, (), split.shares[a])
                if segs is None:
                    break
                length = max(length, len(segs[0]))
            else:
                if best is None or length < best[0]:
                    best = (length, t)
                if length == 0:
                    break
        if best is None:
            return False
        self.target = best[1]
        return True

    def level(self) -> bool:
        csp = self.csp
        for t, split in enumerate(csp.targets):
            self.tick()
            if not self.target_ok(split):
                continue
            if self.bound(csp.init.pos, split.state.pos) > csp.delta:
                continue
            self.target = t
            self.holder = 0
            if self.assign(1, self.pub_init, csp.init.pos):
                return True
            self.pass_token(0, BACKTRACK)
        return False

    def assign(self, s: int, pub: State, relaxed: int) -> bool:
        csp = self.csp
        goal_pos = csp.targets[self.target].state.pos
        for a in range(self.n):
            self.pass_token(a, PROPOSE)
            for act in csp.public_actions[a]:
                self.tick()
                p = act.restrict(csp.public_atoms)
                if not p.applicable(pub):
                    continue
                r2 = relaxed | act.eff_pos
                if s + self.bound(r2, goal_pos) > csp.delta:
                    continue
                if not self.checker.prefix_ok(a, self.landmarks(a, act)):
                    continue
                self.slots.append(SlotValue(a, act))
                pub2 = State((pub.pos | p.eff_pos) & ~p.eff_neg, (pub.neg | p.eff_neg) & ~p.eff_pos)
                if s == csp.delta:
                    ok = self.verify(pub2)
                else:
                    ok = self.assign(s + 1, pub2, r2)
                if ok:
                    return True
                self.slots.pop()
                self.pass_token(a, BACKTRACK)
        # trailing no-op, owned by whoever holds the token last
        self.tick()
        if self.bound(relaxed, goal_pos) == 0:
            owner = self.holder
            n_fill = csp.delta - s + 1
            self.slots.extend([None] * n_fill)
            if self.verify(pub):
                return True
            del self.slots[-n_fill:]
            self.pass_token(owner, BACKTRACK)
        return False

    def verify(self, pub: State) -> bool:
        split = self.csp.targets[self.target]
        if not split.public.issubset(pub):
            return False
        for a in range(self.n):
            self.pass_token(a, PROPOSE)
            self.tick()
            if self.checker.segments(a, self.landmarks(a), split.shares[a]) is None:
                return False
        self.broadcast(BROADCAST)
        return True


def solve_discsp(
    csp: CoordinationCSP,
    budget: int = DEFAULT_NODE_BUDGET,
    checker: InternalCheck | None = None,
    bound: Bound | None = None,
    record: bool = False,
    leg_budget: int = DEFAULT_LEG_BUDGET,
) -> SolveResult:
    """Run the simulated protocol on one level; see the module docstring."""
    checker = checker or InternalCheck(csp.problem, csp.init, leg_budget)
    bound = bound or Bound(csp.problem)
    return _Protocol(csp, checker, bound, budget, record).run()


def enumerate_solutions(csp: CoordinationCSP, target: int = 0, leg_budget: int = DEFAULT_LEG_BUDGET) -> list[Assignment]:
    """Every complete assignment satisfying both constraint families (tiny problems only)."""
    checker = InternalCheck(csp.problem, csp.init, leg_budget)
    values = [v for v in csp.slot_domain if v is not None]
    out = []
    for used in range(csp.delta + 1):
        for combo in itertools.product(values, repeat=used):
            slots = tuple(combo) + (None,) * (csp.delta - used)
            asg = Assignment(slots, derive_goal_support(csp, slots, target), target)
            if check_coordination(asg, csp) is None and check_internal(asg, csp, leg_budget, checker) is None:
                out.append(asg)
    return out


__all__ = [
    "Assignment",
    "Bound",
    "BROADCAST",
    "BACKTRACK",
    "CoordinationCSP",
    "CoordinationViolation",
    "InternalCheck",
    "InternalViolation",
    "MessageLedger",
    "PROPOSE",
    "SlotValue",
    "SolveResult",
    "build_csp",
    "check_coordination",
    "check_internal",
    "derive_goal_support",
    "enumerate_solutions",
    "solve_discsp",
]
