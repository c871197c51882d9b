import random

import pytest

from helpers import bfs_length, tiny_problem
from maplan import fixtures
from maplan.coordination import InternalCheck
from maplan.errors import BudgetExceeded, Unsolvable
from maplan.local import AgentModel, LocalProblem, SearchStats, heuristic, solve_leg, solve_local
from maplan.model import State, apply
from maplan.kernels import INF


def truck_model():
    problem = fixtures.load("logistics2")
    st = problem.domain.structure
    return problem, AgentModel(problem.agents[0], st.private_atoms[0], st.private_actions[0])


def test_goal_in_init_needs_no_search():
    problem, model = truck_model()
    init = problem.init.restrict(model.scope)
    segs, stats = solve_local(LocalProblem(model, init, (), State()))
    assert segs == [[]]
    assert stats.expansions == 0


def test_leg_to_landmark():
    problem, model = truck_model()
    init = problem.init.restrict(model.scope)
    unload_b = problem.action("t1.unload_B")
    goal = State(1 << problem.atoms.index("at_t1_B"))
    segs, _ = solve_local(LocalProblem(model, init, (unload_b,), goal))
    assert [[a.label for a in s] for s in segs] == [["t1.load_A", "t1.move_A_B"], []]


def test_unreachable_landmark_precondition():
    problem, model = truck_model()
    init = problem.init.restrict(model.scope)
    # with the package gone from A nothing the truck can do yields in_p1_t1
    no_pkg = State(init.pos & ~(1 << problem.atoms.index("at_p1_A")), init.neg)
    with pytest.raises(Unsolvable):
        solve_local(LocalProblem(model, no_pkg, (problem.action("t1.unload_B"),), State()))


def test_heuristic_examples():
    problem, model = truck_model()
    s = problem.init.restrict(model.scope)
    assert heuristic(model, s, s) == 0
    one_away = State(1 << problem.atoms.index("in_p1_t1"))
    assert heuristic(model, s, one_away) >= 1
    trap = fixtures.load("trap")
    tm = AgentModel(trap.agents[0], trap.domain.structure.private_atoms[0], trap.agents[0].actions)
    # going back is not among this model's actions, so at_A cannot be produced
    lone = AgentModel(trap.agents[0], 0b11, (trap.action("r.go_A_B"),))
    assert heuristic(lone, State(0b10), State(0b01)) == INF
    with pytest.raises(Unsolvable):
        solve_leg(lone, State(0b10), State(0b01), 100, SearchStats())
    assert heuristic(tm, State(0b01), State(0b11)) < INF


def test_exhaustive_unsolvable_and_budget():
    trap = fixtures.load("trap")
    model = AgentModel(trap.agents[0], 0b11, trap.agents[0].actions)
    with pytest.raises(Unsolvable):
        solve_leg(model, trap.init, trap.goal, 1000, SearchStats())
    with pytest.raises(BudgetExceeded):
        solve_leg(model, trap.init, trap.goal, 1, SearchStats())


def test_leg_optimal_against_bfs():
    checked = 0
    for seed in range(300):
        problem = tiny_problem(seed, n_private=3, n_shared=1, n_actions=5)
        st = problem.domain.structure
        rng = random.Random(seed)
        for a, ag in enumerate(problem.agents):
            model = AgentModel(ag, st.private_atoms[a], st.private_actions[a])
            start = problem.init.restrict(model.scope)
            goal_atoms = [x for x in range(len(problem.atoms)) if model.scope >> x & 1]
            if not goal_atoms:
                continue
            goal = State(1 << rng.choice(goal_atoms))
            expect = bfs_length(model.actions, start, goal)
            try:
                path, end = solve_leg(model, start, goal, 10_000, SearchStats())
            except Unsolvable:
                assert expect is None
                continue
            assert len(path) == expect
            s = start
            for act in path:
                s = apply(s, act)
                assert s.defined
            assert goal.issubset(s) and s == end
            checked += 1
    assert checked > 100


def test_leg_cache_reuses_prefixes():
    problem = fixtures.load("logistics2")
    checker = InternalCheck(problem, problem.init)
    unload_b = problem.action("t1.unload_B")
    assert checker.prefix_ok(0, (unload_b,))
    expansions = checker.stats.expansions
    assert checker.prefix_ok(0, (unload_b,))
    assert checker.stats.expansions == expansions
    cache = checker.caches[0]
    segs = cache.solve((unload_b,), State())
    assert len(segs) == 2 and checker.stats.expansions == expansions


def test_solve_local_deterministic():
    problem, model = truck_model()
    init = problem.init.restrict(model.scope)
    lp = LocalProblem(model, init, (problem.action("t1.unload_B"),), State())
    assert solve_local(lp)[0] == solve_local(lp)[0]
