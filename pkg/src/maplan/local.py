"""Single-agent gap filling between an agent's ordered public actions.

An agent's local problem lives entirely on its private atoms: private
actions touch nothing else, and the public parts of its landmarks are the
coordination layer's business.  Each leg (reach the next landmark's private
precondition, or finally the goal share) is solved by A* ordered on
``g + h_max`` with ``h_add`` and insertion order as tie-breakers, so every
leg is a shortest one given the committed start state.
"""
from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field

from .errors import BudgetExceeded, Unsolvable
from .kernels import INF, RelaxedTask
from .model import Agent, GroundAction, State, apply, bits

DEFAULT_LEG_BUDGET = 100_000


@dataclass
class SearchStats:
    expansions: int = 0
    generated: int = 0
    wall_time: float = 0.0

    def add(self, other: "SearchStats") -> None:
        self.expansions += other.expansions
        self.generated += other.generated
        self.wall_time += other.wall_time


class AgentModel:
    """Relaxation and successor data for one agent's private sub-problem.

    Built once per (problem structure, agent) and shared by every local
    problem of that agent.
    """

    def __init__(self, agent: Agent, scope: int, actions: tuple[GroundAction, ...]):
        self.agent = agent
        self.scope = scope
        self.actions = tuple(sorted(actions, key=lambda a: a.label))
        self.atoms = bits(scope)
        self.fact = {atom: i for i, atom in enumerate(self.atoms)}
        self.task = RelaxedTask(
            len(self.atoms),
            [[self.fact[x] for x in bits(a.pre_pos)] for a in self.actions],
            [[self.fact[x] for x in bits(a.eff_pos)] for a in self.actions],
        )

    def facts(self, mask: int) -> list[int]:
        fact = self.fact
        return [fact[x] for x in bits(mask & self.scope)]

    def estimates(self, s: State, goal: State) -> tuple[float, float]:
        """(h_max, h_add) of the positive goal terms missing from ``s``."""
        missing = goal.pos & ~s.pos
        if not missing:
            return 0, 0
        return self.task.both(self.facts(s.pos), self.facts(missing))


def heuristic(model: AgentModel, s: State, goal: State) -> float:
    """Additive delete-relaxation estimate; 0 iff the positive goal holds, inf if unreachable."""
    return model.estimates(s, goal)[1]


@dataclass(frozen=True)
class LocalProblem:
    model: AgentModel
    init: State
    landmarks: tuple[GroundAction, ...]
    goal: State

    @property
    def agent(self) -> Agent:
        return self.model.agent


def solve_leg(model: AgentModel, start: State, goal: State, budget: int, stats: SearchStats) -> tuple[tuple[GroundAction, ...], State]:
    """Shortest private action sequence from ``start`` to a state containing ``goal``."""
    if goal.issubset(start):
        return (), start
    h, ha = model.estimates(start, goal)
    if h == INF:
        raise Unsolvable(f"{model.agent.name}: leg goal relaxed-unreachable")
    seq = itertools.count()
    root = (start.pos, start.neg)
    parent: dict[tuple[int, int], tuple | None] = {root: None}
    best_g = {root: 0}
    heap = [(h, ha, next(seq), 0, start)]
    closed: set[tuple[int, int]] = set()
    actions = model.actions
    while heap:
        _, _, _, g, s = heapq.heappop(heap)
        key = (s.pos, s.neg)
        if key in closed:
            continue
        if goal.issubset(s):
            path = []
            node = parent[key]
            while node is not None:
                prev, act = node
                path.append(act)
                node = parent[prev]
            path.reverse()
            return tuple(path), s
        closed.add(key)
        stats.expansions += 1
        if stats.expansions > budget:
            raise BudgetExceeded(f"{model.agent.name}: leg budget of {budget} expansions exhausted")
        for a in actions:
            if a.pre_pos & ~s.pos or a.pre_neg & ~s.neg:
                continue
            t = apply(s, a)
            tkey = (t.pos, t.neg)
            if tkey in closed or best_g.get(tkey, INF) <= g + 1:
                continue
            th, tha = model.estimates(t, goal)
            stats.generated += 1
            if th == INF:
                continue
            best_g[tkey] = g + 1
            parent[tkey] = (key, a)
            heapq.heappush(heap, (g + 1 + th, tha, next(seq), g + 1, t))
    raise Unsolvable(f"{model.agent.name}: leg goal unreachable")


@dataclass
class LegCache:
    """Memo of committed legs for one agent from one start state.

    ``prefix[labels]`` holds (segments, state after the last landmark) or the
    exception that killed that prefix; ``final[(goal, labels)]`` the closing
    leg towards ``goal``.  Prefix legs do not depend on the goal, so several
    target states share them.
    """

    model: AgentModel
    init: State
    budget: int = DEFAULT_LEG_BUDGET
    stats: SearchStats = field(default_factory=SearchStats)
    prefix: dict = field(default_factory=dict)
    final: dict = field(default_factory=dict)

    def _leg(self, start: State, goal: State):
        t0 = time.perf_counter()
        local = SearchStats()
        try:
            return solve_leg(self.model, start, goal, self.budget, local)
        finally:
            local.wall_time = time.perf_counter() - t0
            self.stats.add(local)

    def through(self, landmarks: tuple[GroundAction, ...]):
        """Segments before each landmark and the state after the last one."""
        key = tuple(a.label for a in landmarks)
        hit = self.prefix.get(key)
        if hit is None:
            if not landmarks:
                hit = ((), self.init)
            else:
                try:
                    segs, s = self.through(landmarks[:-1])
                    lm = landmarks[-1].restrict(self.model.scope)
                    seg, s = self._leg(s, lm.pre)
                    hit = (segs + (seg,), apply(s, lm))
                except (Unsolvable, BudgetExceeded) as exc:
                    hit = exc
            self.prefix[key] = hit
        if isinstance(hit, Exception):
            raise hit
        return hit

    def solve(self, landmarks: tuple[GroundAction, ...], goal: State):
        """All ``len(landmarks) + 1`` segments ending in ``goal``, or raise."""
        key = (goal.pos, goal.neg, tuple(a.label for a in landmarks))
        hit = self.final.get(key)
        if hit is None:
            try:
                segs, s = self.through(landmarks)
                seg, _ = self._leg(s, goal)
                hit = segs + (seg,)
            except (Unsolvable, BudgetExceeded) as exc:
                hit = exc
            self.final[key] = hit
        if isinstance(hit, Exception):
            raise hit
        return hit


def solve_local(lp: LocalProblem, budget: int = DEFAULT_LEG_BUDGET):
    """Return (segments, stats); segment ``i`` precedes landmark ``i+1``."""
    t0 = time.perf_counter()
    cache = LegCache(lp.model, lp.init, budget)
    segs = cache.solve(tuple(lp.landmarks), lp.goal)
    cache.stats.wall_time = time.perf_counter() - t0
    return [list(s) for s in segs], cache.stats
