"""State, action and plan algebra for grounded multi-agent STRIPS.

Terms are stored as two bit masks over interned atom indices: ``pos`` holds
the atoms asserted true and ``neg`` the atoms asserted false.  A state that
mentions neither bit for an atom is simply silent about it.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Iterator, NamedTuple, Sequence

from .errors import IllFormedJointAction, InconsistentTerms, PlanError

EPS_LABEL = "eps"


def bits(mask: int) -> list[int]:
    """Indices of the set bits of ``mask``, ascending."""
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


class Term(NamedTuple):
    atom: int
    negated: bool = False

    def negate(self) -> "Term":
        return Term(self.atom, not self.negated)


def term_masks(terms: Iterable[Term]) -> tuple[int, int]:
    pos = neg = 0
    for t in terms:
        if t.negated:
            neg |= 1 << t.atom
        else:
            pos |= 1 << t.atom
    if pos & neg:
        raise InconsistentTerms(f"atoms {bits(pos & neg)} both asserted and negated")
    return pos, neg


def mask_terms(pos: int, neg: int) -> frozenset[Term]:
    return frozenset([Term(a, False) for a in bits(pos)] + [Term(a, True) for a in bits(neg)])


class State:
    """A consistent set of terms, or the undefined state."""

    __slots__ = ("pos", "neg", "defined")

    def __init__(self, pos: int = 0, neg: int = 0, defined: bool = True):
        if defined and pos & neg:
            raise InconsistentTerms(f"atoms {bits(pos & neg)} both asserted and negated")
        object.__setattr__(self, "pos", pos if defined else 0)
        object.__setattr__(self, "neg", neg if defined else 0)
        object.__setattr__(self, "defined", defined)

    def __setattr__(self, name, value):
        raise AttributeError("State is immutable")

    @classmethod
    def from_terms(cls, terms: Iterable[Term]) -> "State":
        return cls(*term_masks(terms))

    @property
    def terms(self) -> frozenset[Term]:
        return mask_terms(self.pos, self.neg)

    def __contains__(self, t: Term) -> bool:
        return bool((self.neg if t.negated else self.pos) >> t.atom & 1)

    def issubset(self, other: "State") -> bool:
        return (
            self.defined
            and other.defined
            and not self.pos & ~other.pos
            and not self.neg & ~other.neg
        )

    def __le__(self, other: "State") -> bool:
        return self.issubset(other)

    def restrict(self, atoms: int) -> "State":
        return State(self.pos & atoms, self.neg & atoms) if self.defined else self

    def __len__(self) -> int:
        return self.pos.bit_count() + self.neg.bit_count()

    def __eq__(self, other) -> bool:
        if not isinstance(other, State):
            return NotImplemented
        return (self.defined, self.pos, self.neg) == (other.defined, other.pos, other.neg)

    def __hash__(self) -> int:
        return hash((self.defined, self.pos, self.neg))

    def __repr__(self) -> str:
        if not self.defined:
            return "State(UNDEFINED)"
        return f"State(pos={bits(self.pos)}, neg={bits(self.neg)})"


UNDEFINED = State(defined=False)
EMPTY_STATE = State()


@dataclass(frozen=True)
class GroundAction:
    label: str
    pre_pos: int = 0
    pre_neg: int = 0
    eff_pos: int = 0
    eff_neg: int = 0

    def __post_init__(self):
        if self.pre_pos & self.pre_neg:
            raise InconsistentTerms(f"{self.label}: inconsistent preconditions")
        if self.eff_pos & self.eff_neg:
            raise InconsistentTerms(f"{self.label}: inconsistent effects")

    @classmethod
    def from_terms(cls, label: str, pre: Iterable[Term] = (), eff: Iterable[Term] = ()) -> "GroundAction":
        return cls(label, *term_masks(pre), *term_masks(eff))

    @property
    def pre(self) -> State:
        return State(self.pre_pos, self.pre_neg)

    @property
    def eff(self) -> State:
        return State(self.eff_pos, self.eff_neg)

    @property
    def atoms(self) -> int:
        return self.pre_pos | self.pre_neg | self.eff_pos | self.eff_neg

    @property
    def is_eps(self) -> bool:
        return self.label == EPS_LABEL

    def applicable(self, s: State) -> bool:
        return s.defined and not self.pre_pos & ~s.pos and not self.pre_neg & ~s.neg

    def restrict(self, atoms: int) -> "GroundAction":
        return GroundAction(
            self.label,
            self.pre_pos & atoms,
            self.pre_neg & atoms,
            self.eff_pos & atoms,
            self.eff_neg & atoms,
        )

    def __repr__(self) -> str:
        return f"<{self.label}>"


EPS = GroundAction(EPS_LABEL)


def _transform(s: State, pre_pos: int, pre_neg: int, eff_pos: int, eff_neg: int) -> State:
    if not s.defined or pre_pos & ~s.pos or pre_neg & ~s.neg:
        return UNDEFINED
    return State((s.pos | eff_pos) & ~eff_neg, (s.neg | eff_neg) & ~eff_pos)


def apply(s: State, a: GroundAction) -> State:
    """``(s ∪ eff) minus the complements of eff`` when applicable, else UNDEFINED."""
    return _transform(s, a.pre_pos, a.pre_neg, a.eff_pos, a.eff_neg)


class JointAction:
    """One synchronous step: a tuple of per-agent actions (EPS for idle)."""

    __slots__ = ("parts", "pre_pos", "pre_neg", "eff_pos", "eff_neg")

    def __init__(self, parts: Sequence[GroundAction]):
        parts = tuple(parts)
        pp = pn = ep = en = 0
        for p in parts:
            pp |= p.pre_pos
            pn |= p.pre_neg
            ep |= p.eff_pos
            en |= p.eff_neg
        object.__setattr__(self, "parts", parts)
        object.__setattr__(self, "pre_pos", pp)
        object.__setattr__(self, "pre_neg", pn)
        object.__setattr__(self, "eff_pos", ep)
        object.__setattr__(self, "eff_neg", en)

    def __setattr__(self, name, value):
        raise AttributeError("JointAction is immutable")

    @classmethod
    def idle(cls, n: int) -> "JointAction":
        return cls((EPS,) * n)

    @property
    def well_formed(self) -> bool:
        return not (self.pre_pos & self.pre_neg or self.eff_pos & self.eff_neg)

    @property
    def is_idle(self) -> bool:
        return all(p.is_eps for p in self.parts)

    def applicable(self, s: State) -> bool:
        return s.defined and not self.pre_pos & ~s.pos and not self.pre_neg & ~s.neg

    def replace(self, agent: int, action: GroundAction) -> "JointAction":
        parts = list(self.parts)
        parts[agent] = action
        return JointAction(parts)

    def __len__(self) -> int:
        return len(self.parts)

    def __getitem__(self, i: int) -> GroundAction:
        return self.parts[i]

    def __iter__(self) -> Iterator[GroundAction]:
        return iter(self.parts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, JointAction):
            return NotImplemented
        return self.parts == other.parts

    def __hash__(self) -> int:
        return hash(self.parts)

    def __repr__(self) -> str:
        return "(" + ", ".join(p.label for p in self.parts) + ")"


def apply_joint(s: State, j: JointAction) -> State:
    if not j.well_formed:
        raise IllFormedJointAction(f"joint action {j!r} has inconsistent preconditions or effects")
    return _transform(s, j.pre_pos, j.pre_neg, j.eff_pos, j.eff_neg)


@dataclass(frozen=True)
class Plan:
    """A synchronous multi-agent plan stored step by step.

    Steps are 1-based in the public API: ``plan.step(1)`` is the first joint
    action, ``plan.cell(i, j)`` the action of agent ``j`` (0-based) at step ``i``.
    """

    steps: tuple[JointAction, ...]
    agent_count: int

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        for j in self.steps:
            if len(j) != self.agent_count:
                raise PlanError(f"joint action {j!r} does not have {self.agent_count} parts")

    @classmethod
    def empty(cls, agent_count: int) -> "Plan":
        return cls((), agent_count)

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[GroundAction]], agent_count: int) -> "Plan":
        return cls(tuple(JointAction(r) for r in rows), agent_count)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[JointAction]:
        return iter(self.steps)

    def step(self, i: int) -> JointAction:
        if not 1 <= i <= len(self.steps):
            raise IndexError(f"step {i} outside 1..{len(self.steps)}")
        return self.steps[i - 1]

    def cell(self, i: int, agent: int) -> GroundAction:
        if i > len(self.steps):
            return EPS
        return self.step(i)[agent]

    def _check_agents(self, other: "Plan"):
        if other.agent_count != self.agent_count:
            raise PlanError(f"agent count mismatch: {self.agent_count} vs {other.agent_count}")

    def concat(self, other: "Plan") -> "Plan":
        self._check_agents(other)
        return Plan(self.steps + other.steps, self.agent_count)

    __add__ = concat

    def fragment(self, i: int, j: int | None = None) -> "Plan":
        """Steps ``i..j`` inclusive; ``j=None`` means through the end."""
        n = len(self.steps)
        if j is None:
            j = n
        if not (1 <= i <= j <= n):
            raise IndexError(f"fragment [{i}..{j}] outside plan of length {n}")
        return Plan(self.steps[i - 1 : j], self.agent_count)

    def prefix(self, i: int) -> "Plan":
        """Steps ``1..i-1``."""
        if not 1 <= i <= len(self.steps) + 1:
            raise IndexError(f"prefix before step {i} outside plan of length {len(self.steps)}")
        return Plan(self.steps[: i - 1], self.agent_count)

    def suffix(self, i: int) -> "Plan":
        """Steps ``i..|P|``; empty when ``i > |P|``."""
        if i < 1:
            raise IndexError(f"suffix from step {i}")
        return Plan(self.steps[i - 1 :], self.agent_count)

    def padded(self, length: int) -> "Plan":
        extra = length - len(self.steps)
        if extra <= 0:
            return self
        return Plan(self.steps + (JointAction.idle(self.agent_count),) * extra, self.agent_count)

    def trace(self, s: State) -> list[State]:
        """States visited when executing from ``s`` in an ideal environment."""
        out = [s]
        for j in self.steps:
            s = apply_joint(s, j)
            out.append(s)
        return out

    def final_state(self, s: State) -> State:
        for j in self.steps:
            s = apply_joint(s, j)
        return s

    def labels(self) -> list[list[str]]:
        return [[p.label for p in j] for j in self.steps]

    def __repr__(self) -> str:
        return f"Plan(len={len(self.steps)}, agents={self.agent_count})"


def diff(p1: Plan, p2: Plan) -> int:
    """Number of (step, agent) cells in which two plans differ, ε-padding the shorter."""
    p1._check_agents(p2)
    n = max(len(p1), len(p2))
    count = 0
    for i in range(1, n + 1):
        for a in range(p1.agent_count):
            if p1.cell(i, a).label != p2.cell(i, a).label:
                count += 1
    return count


@dataclass(frozen=True)
class Agent:
    name: str
    actions: tuple[GroundAction, ...]

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))

    @cached_property
    def by_label(self) -> dict[str, GroundAction]:
        return {a.label: a for a in self.actions}

    @cached_property
    def atoms(self) -> int:
        m = 0
        for a in self.actions:
            m |= a.atoms
        return m


@dataclass(frozen=True)
class Structure:
    """Public/private split of a multi-agent domain (atom and action level)."""

    public_atoms: int
    agent_atoms: tuple[int, ...]
    private_atoms: tuple[int, ...]
    public_actions: tuple[tuple[GroundAction, ...], ...]
    private_actions: tuple[tuple[GroundAction, ...], ...]

    @property
    def public_labels(self) -> frozenset[str]:
        return frozenset(a.label for acts in self.public_actions for a in acts)

    @property
    def private_labels(self) -> frozenset[str]:
        return frozenset(a.label for acts in self.private_actions for a in acts)

    def owner_of_atom(self, atom: int) -> int | None:
        """Agent whose private atom this is; None for public or untouched atoms."""
        bit = 1 << atom
        for i, m in enumerate(self.private_atoms):
            if m & bit:
                return i
        return None


@dataclass(frozen=True)
class Domain:
    atoms: tuple[str, ...]
    agents: tuple[Agent, ...]

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "agents", tuple(self.agents))
        seen: dict[str, int] = {}
        for i, ag in enumerate(self.agents):
            for a in ag.actions:
                if a.is_eps:
                    raise PlanError(f"agent {ag.name} declares the reserved label {EPS_LABEL!r}")
                if a.label in seen and seen[a.label] != i:
                    raise PlanError(f"action label {a.label!r} shared by two agents")
                seen[a.label] = i

    @cached_property
    def atom_index(self) -> dict[str, int]:
        return {a: i for i, a in enumerate(self.atoms)}

    @cached_property
    def action_owner(self) -> dict[str, int]:
        return {a.label: i for i, ag in enumerate(self.agents) for a in ag.actions}

    @cached_property
    def structure(self) -> Structure:
        agent_atoms = tuple(ag.atoms for ag in self.agents)
        public = 0
        for i, j in itertools.combinations(range(len(agent_atoms)), 2):
            public |= agent_atoms[i] & agent_atoms[j]
        pub_acts, priv_acts = [], []
        for ag in self.agents:
            pub_acts.append(tuple(sorted((a for a in ag.actions if a.atoms & public), key=lambda a: a.label)))
            priv_acts.append(tuple(sorted((a for a in ag.actions if not a.atoms & public), key=lambda a: a.label)))
        return Structure(
            public_atoms=public,
            agent_atoms=agent_atoms,
            private_atoms=tuple(m & ~public for m in agent_atoms),
            public_actions=tuple(pub_acts),
            private_actions=tuple(priv_acts),
        )


@dataclass(frozen=True)
class Problem:
    domain: Domain
    init: State
    goal: State
    name: str = "problem"

    def __post_init__(self):
        if not self.init.defined or not self.goal.defined:
            raise InconsistentTerms("initial state and goal must be defined term sets")

    @classmethod
    def build(cls, atoms, agents, init: State, goal: State, name: str = "problem") -> "Problem":
        return cls(Domain(tuple(atoms), tuple(agents)), init, goal, name)

    @property
    def atoms(self) -> tuple[str, ...]:
        return self.domain.atoms

    @property
    def agents(self) -> tuple[Agent, ...]:
        return self.domain.agents

    @property
    def n_agents(self) -> int:
        return len(self.domain.agents)

    def with_init(self, s: State) -> "Problem":
        return replace(self, init=s)

    def with_goal(self, g: State) -> "Problem":
        return replace(self, goal=g)

    def action(self, label: str) -> GroundAction:
        if label == EPS_LABEL:
            return EPS
        owner = self.domain.action_owner.get(label)
        if owner is None:
            raise KeyError(label)
        return self.agents[owner].by_label[label]

    def term_name(self, t: Term) -> str:
        return ("!" if t.negated else "") + self.atoms[t.atom]

    def describe(self, s: State) -> list[str]:
        return sorted(self.term_name(t) for t in s.terms)


def classify_public(problem: Problem) -> tuple[frozenset[str], frozenset[str]]:
    st = problem.domain.structure
    return st.public_labels, st.private_labels


class Violation(NamedTuple):
    kind: str  # "well-formedness" | "ill-formed" | "feasibility" | "goal"
    step: int
    detail: str = ""


def validate_plan(problem: Problem, plan: Plan, init: State | None = None) -> Violation | None:
    """Check well-formedness, feasibility and goal attainment; None means valid."""
    s = problem.init if init is None else init
    if plan.agent_count != problem.n_agents:
        return Violation("well-formedness", 0, f"plan has {plan.agent_count} columns for {problem.n_agents} agents")
    for i, j in enumerate(plan.steps, 1):
        for a, part in enumerate(j.parts):
            if not part.is_eps and problem.agents[a].by_label.get(part.label) != part:
                return Violation("well-formedness", i, f"{part.label} is not an action of {problem.agents[a].name}")
        if not j.well_formed:
            return Violation("ill-formed", i, f"inconsistent joint action {j!r}")
        nxt = apply_joint(s, j)
        if not nxt.defined:
            return Violation("feasibility", i, f"{j!r} not applicable")
        s = nxt
    if not problem.goal.issubset(s):
        return Violation("goal", len(plan), "goal terms missing from final state")
    return None


def min_coordination_k(plan: Plan, public: Iterable[str]) -> int | None:
    """Smallest k such that every length-k fragment holds a public action."""
    public = frozenset(public)
    longest = run = 0
    seen_public = False
    for j in plan.steps:
        if any(p.label in public for p in j.parts):
            seen_public = True
            run = 0
        else:
            run += 1
            longest = max(longest, run)
    if not seen_public:
        return None
    return longest + 1


def is_compressible(problem: Problem, plan: Plan, max_len: int = 12, init: State | None = None) -> bool:
    """Brute force: does removing some contiguous fragment keep the plan a solution?"""
    n = len(plan)
    if n > max_len:
        raise ValueError(f"plan length {n} exceeds oracle bound {max_len}")
    for i in range(1, n + 1):
        for j in range(i, n + 1):
            shorter = plan.prefix(i).concat(plan.suffix(j + 1))
            if validate_plan(problem, shorter, init) is None:
                return True
    return False


__all__ = [
    "EPS",
    "EPS_LABEL",
    "UNDEFINED",
    "EMPTY_STATE",
    "Agent",
    "Domain",
    "GroundAction",
    "JointAction",
    "Plan",
    "Problem",
    "State",
    "Structure",
    "Term",
    "Violation",
    "apply",
    "apply_joint",
    "bits",
    "classify_public",
    "diff",
    "is_compressible",
    "min_coordination_k",
    "validate_plan",
]
