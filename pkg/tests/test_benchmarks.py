import pytest

from maplan.benchmarks import FAMILIES, BenchmarkParams, generate_benchmark, minimal_params
from maplan.domainio import format_problem
from maplan.model import classify_public, min_coordination_k
from maplan.planner import Limits, ma_plan


@pytest.mark.parametrize("family", FAMILIES)
def test_generator_deterministic(family):
    p = BenchmarkParams(family, 3, seed=11)
    assert format_problem(generate_benchmark(p)) == format_problem(generate_benchmark(p))


@pytest.mark.parametrize("agents", [2, 3, 4, 5])
def test_satellites_have_no_public_actions(agents):
    problem = generate_benchmark(BenchmarkParams("satellites", agents, seed=agents))
    public, _ = classify_public(problem)
    assert public == frozenset()


@pytest.mark.parametrize("agents,packages", [(2, 1), (3, 1), (3, 2), (4, 3)])
def test_logistics_public_actions_span_agents(agents, packages):
    problem = generate_benchmark(BenchmarkParams("logistics", agents, packages=packages, seed=3))
    public, _ = classify_public(problem)
    owners = {problem.domain.action_owner[l] for l in public}
    assert len(owners) >= 2


def test_rovers_public_actions_at_the_end():
    problem = generate_benchmark(minimal_params("rovers", 3, seed=1))
    public, _ = classify_public(problem)
    assert public and all(".communicate_" in l for l in public)
    plan = ma_plan(problem).plan
    assert min_coordination_k(plan, public) >= len(plan) - 2


def test_logistics_two_packages_tightly_coordinated():
    problem = generate_benchmark(BenchmarkParams("logistics", 3, packages=2, seed=1))
    public, _ = classify_public(problem)
    plan = ma_plan(problem, Limits(max_delta=8)).plan
    assert min_coordination_k(plan, public) <= 4


@pytest.mark.parametrize("bad", [
    BenchmarkParams("logistics", 3, locations=1),
    BenchmarkParams("logistics", 3, packages=0),
    BenchmarkParams("rovers", 3, waypoints=1),
    BenchmarkParams("satellites", 3, targets=3, directions=3),
    BenchmarkParams("logistics", 7),
    BenchmarkParams("zoo", 3),
])
def test_invalid_params(bad):
    with pytest.raises(ValueError):
        generate_benchmark(bad)
