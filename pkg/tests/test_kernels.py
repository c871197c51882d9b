import math
import random

import pytest

from maplan import kernels
from maplan.kernels import INF, PyRelaxedTask, RelaxedTask


def random_task(rng, n_facts=8, n_actions=10, zero_cost=False):
    pres = [rng.sample(range(n_facts), rng.randint(0, 2)) for _ in range(n_actions)]
    adds = [rng.sample(range(n_facts), rng.randint(1, 2)) for _ in range(n_actions)]
    costs = [rng.choice([0, 1]) if zero_cost else 1 for _ in range(n_actions)]
    return n_facts, pres, adds, costs


def fixpoint(n_facts, pres, adds, costs, state, combine):
    """Bellman-Ford style reference for h_max (combine=max) and h_add (combine=sum)."""
    fc = [INF] * n_facts
    for f in state:
        fc[f] = 0
    changed = True
    while changed:
        changed = False
        for pre, add, c in zip(pres, adds, costs):
            vals = [fc[f] for f in pre]
            base = combine(vals) if vals else 0
            if base == INF:
                continue
            for f in add:
                if base + c < fc[f]:
                    fc[f] = base + c
                    changed = True
    return fc


def reference(task_args, state, goal, combine):
    fc = fixpoint(*task_args, state, combine)
    vals = [fc[g] for g in goal]
    return combine(vals) if vals else 0


def relaxed_optimum(n_facts, pres, adds, costs, state, goal):
    """h+ by brute force over action subsets (tiny tasks only)."""
    best = INF
    n = len(pres)
    for mask in range(1 << n):
        reach = set(state)
        grew = True
        while grew:
            grew = False
            for a in range(n):
                if mask >> a & 1 and set(pres[a]) <= reach and not set(adds[a]) <= reach:
                    reach |= set(adds[a])
                    grew = True
        if set(goal) <= reach:
            best = min(best, sum(costs[a] for a in range(n) if mask >> a & 1))
    return best


def test_backend_flag():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("cls", [RelaxedTask, PyRelaxedTask])
def test_hmax_hadd_match_reference(cls):
    rng = random.Random(3)
    for _ in range(200):
        args = random_task(rng)
        task = cls(*args)
        state = rng.sample(range(8), rng.randint(0, 3))
        goal = rng.sample(range(8), rng.randint(1, 3))
        hmax, hadd = task.both(state, goal)
        assert hmax == reference(args, state, goal, lambda v: max(v))
        assert hadd == reference(args, state, goal, lambda v: math.fsum(v) if INF not in v else INF)
        assert task.hmax(state, goal) == hmax and task.hadd(state, goal) == hadd


@pytest.mark.parametrize("cls", [RelaxedTask, PyRelaxedTask])
def test_lmcut_between_hmax_and_hplus(cls):
    rng = random.Random(4)
    for _ in range(150):
        args = random_task(rng, n_facts=6, n_actions=7, zero_cost=True)
        task = cls(*args)
        state = rng.sample(range(6), rng.randint(0, 2))
        goal = rng.sample(range(6), rng.randint(1, 2))
        lm = task.lmcut(state, goal)
        hplus = relaxed_optimum(*args, state, goal)
        if hplus == INF:
            assert lm == INF
        else:
            assert task.hmax(state, goal) <= lm <= hplus


def test_backends_agree():
    rng = random.Random(5)
    for _ in range(300):
        args = random_task(rng, 10, 14, zero_cost=True)
        a, b = RelaxedTask(*args), PyRelaxedTask(*args)
        state = rng.sample(range(10), rng.randint(0, 4))
        goal = rng.sample(range(10), rng.randint(1, 3))
        assert a.both(state, goal) == b.both(state, goal)
        assert a.lmcut(state, goal) == b.lmcut(state, goal)
        assert a.fact_costs(state) == b.fact_costs(state)


def test_goal_in_state_costs_zero():
    task = PyRelaxedTask(3, [[0]], [[1]])
    assert task.both([0, 2], [2]) == (0, 0)
    assert task.lmcut([0, 2], [2]) == 0


def test_unreachable_fact_is_inf():
    task = PyRelaxedTask(3, [[0]], [[1]])
    assert task.hadd([0], [2]) == INF
    assert task.lmcut([0], [2]) == INF
