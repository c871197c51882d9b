"""Random generators shared by the property and oracle tests."""
from __future__ import annotations

import random
from collections import deque

from maplan.model import EPS, Agent, GroundAction, JointAction, Plan, Problem, State, apply, apply_joint, validate_plan
from maplan.repair import RepairProblem, executable_remainder
from maplan.simulation import FailureModel, execute_fail


def random_state(rng: random.Random, n_atoms: int, density: float = 0.5) -> State:
    pos = neg = 0
    for a in range(n_atoms):
        r = rng.random()
        if r < density / 2:
            pos |= 1 << a
        elif r < density:
            neg |= 1 << a
    return State(pos, neg)


def random_action(rng: random.Random, n_atoms: int, label: str, atoms: list[int] | None = None) -> GroundAction:
    pool = atoms if atoms is not None else list(range(n_atoms))
    pre = random_state_over(rng, pool, 0.4)
    eff = random_state_over(rng, pool, 0.5)
    return GroundAction(label, pre.pos, pre.neg, eff.pos, eff.neg)


def random_state_over(rng: random.Random, atoms: list[int], density: float) -> State:
    pos = neg = 0
    for a in atoms:
        r = rng.random()
        if r < density / 2:
            pos |= 1 << a
        elif r < density:
            neg |= 1 << a
    return State(pos, neg)


def random_plan(rng: random.Random, pool: list[list[GroundAction]], length: int) -> Plan:
    """Plan whose agent ``i`` column draws from ``pool[i]`` plus ε."""
    steps = [JointAction([rng.choice(acts + [EPS]) for acts in pool]) for _ in range(length)]
    return Plan(tuple(steps), len(pool))


def tiny_problem(seed: int, n_private: int = 2, n_shared: int = 2, n_actions: int = 4) -> Problem:
    """Two agents with private atoms each and a few shared atoms.

    Preconditions are positive and effects are mixed, as in STRIPS domains.
    """
    rng = random.Random(seed)
    names = [f"a{i}" for i in range(2 * n_private + n_shared)]
    shared = list(range(2 * n_private, 2 * n_private + n_shared))
    agents = []
    for ag in range(2):
        own = list(range(ag * n_private, (ag + 1) * n_private))
        acts = []
        for k in range(n_actions):
            scope = own + ([rng.choice(shared)] if rng.random() < 0.6 else [])
            pre_atoms = [a for a in scope if rng.random() < 0.4]
            pre = sum(1 << a for a in pre_atoms)
            eff_pos = eff_neg = 0
            for a in scope:
                r = rng.random()
                if r < 0.45:
                    eff_pos |= 1 << a
                elif r < 0.7:
                    eff_neg |= 1 << a
            if not (eff_pos | eff_neg):
                eff_pos = 1 << rng.choice(scope)
            acts.append(GroundAction(f"g{ag}.act{k}", pre, 0, eff_pos, eff_neg))
        agents.append(Agent(f"g{ag}", tuple(acts)))
    init = State(sum(1 << a for a in range(len(names)) if rng.random() < 0.35))
    goal_atoms = rng.sample(range(len(names)), rng.randint(1, 2))
    goal = State(sum(1 << a for a in goal_atoms))
    return Problem.build(names, agents, init, goal, f"tiny-{seed}")


def bfs_length(actions, start: State, goal: State, limit: int = 100_000) -> int | None:
    """Shortest sequential plan length over ``actions``, or None."""
    if goal.issubset(start):
        return 0
    seen = {start}
    q = deque([(start, 0)])
    while q:
        s, d = q.popleft()
        for a in actions:
            t = apply(s, a)
            if not t.defined or t in seen:
                continue
            if goal.issubset(t):
                return d + 1
            seen.add(t)
            if len(seen) > limit:
                raise RuntimeError("state space too large")
            q.append((t, d + 1))
    return None


def inject_failure(problem: Problem, plan: Plan, rng: random.Random, kind: str = "action", start: State | None = None):
    """Run ``plan`` nominally up to a random step, break that step, then keep
    running until the next joint action is inapplicable.

    Returns ``(failed_state, failed_step)`` as the monitor would see them, or
    None when the step drew no failure.  ``start`` defaults to the initial state.
    """
    i = rng.randint(1, len(plan))
    s = plan.prefix(i).final_state(problem.init if start is None else start)
    model = FailureModel(kind, 1.0, 1, 0, 1)
    s, injected = execute_fail(s, plan.step(i), model, rng, len(problem.atoms))
    if injected is None:
        return None
    k = i + 1
    while k <= len(plan) and plan.step(k).applicable(s):
        s = apply_joint(s, plan.step(k))
        k += 1
    return s, k


def check_outcome(rp, out):
    """Structural checks shared with the acceptance suite; returns a list of problems."""
    bad = []
    if validate_plan(rp.problem, out.plan, rp.failed_state) is not None:
        bad.append("does not solve")
    if out.strategy == "bot" and out.tag == "ok":
        j = out.target_index
        if out.plan != out.head + rp.plan.suffix(j + 1):
            bad.append("bot decomposition")
        if not rp.trace[j].issubset(out.head.final_state(rp.failed_state)):
            bad.append("bot back plan misses trace state")
    if out.strategy in ("lazy", "repeated-lazy") and out.tail is not None:
        rem, _ = executable_remainder(rp.plan, rp.failed_step, rp.failed_state)
        if out.head != rem or out.plan != rem + out.tail:
            bad.append("lazy decomposition")
    return bad


def repair_cases(problem, plan, n, seed):
    """Up to ``n`` repair problems from seeded action drops (70%) and perturbations."""
    rng = random.Random(seed)
    out = []
    tries = 0
    while len(out) < n and tries < 50 * n:
        tries += 1
        kind = "action" if rng.random() < 0.7 else "perturb"
        hit = inject_failure(problem, plan, rng, kind)
        if hit is not None:
            out.append(RepairProblem(problem, plan, *hit))
    return out
