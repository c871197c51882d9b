import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_action, random_plan, random_state
from maplan import fixtures
from maplan.domainio import parse_plan
from maplan.errors import IllFormedJointAction, InconsistentTerms, PlanError
from maplan.model import (
    EPS,
    UNDEFINED,
    Agent,
    GroundAction,
    JointAction,
    Plan,
    Problem,
    State,
    Term,
    apply,
    apply_joint,
    classify_public,
    diff,
    is_compressible,
    min_coordination_k,
    validate_plan,
)

N_ATOMS = 6


@st.composite
def states(draw, n=N_ATOMS):
    pos = draw(st.integers(0, (1 << n) - 1))
    neg = draw(st.integers(0, (1 << n) - 1)) & ~pos
    return State(pos, neg)


@st.composite
def actions(draw, label="x"):
    pre = draw(states())
    eff = draw(states())
    return GroundAction(label, pre.pos, pre.neg, eff.pos, eff.neg)


def S(**kw):
    """State over atoms p, q, r, a (truck at A) and b (truck at B)."""
    table = {"p": 0, "q": 1, "r": 2, "a": 3, "b": 4}
    pos = sum(1 << table[k] for k, v in kw.items() if v)
    neg = sum(1 << table[k] for k, v in kw.items() if not v)
    return State(pos, neg)


def act(label, pre=None, eff=None):
    pre, eff = pre or S(), eff or S()
    return GroundAction(label, pre.pos, pre.neg, eff.pos, eff.neg)


def test_term_double_negation():
    t = Term(3)
    assert t.negate().negate() == t
    assert t.negate().negated


def test_state_rejects_inconsistent_terms():
    with pytest.raises(InconsistentTerms):
        State(0b1, 0b1)


def test_state_need_not_be_complete():
    s = S(p=True)
    assert Term(1) not in s and Term(1, True) not in s


def test_apply_move_example():
    # at_t1_A -> at_t1_B
    s = S(a=True)
    move = act("move", S(a=True), S(b=True, a=False))
    assert apply(s, move) == S(b=True, a=False)


def test_apply_unmet_precondition_is_undefined():
    move = act("move", S(a=True), S(b=True, a=False))
    assert apply(S(b=True), move) == UNDEFINED
    assert not apply(S(b=True), move).defined


def test_apply_eps_is_identity():
    s = S(p=True, q=False)
    assert apply(s, EPS) == s


def test_undefined_propagates():
    assert apply(UNDEFINED, EPS) == UNDEFINED


def test_apply_joint_examples():
    a = act("a", S(p=True), S(q=True))
    assert apply_joint(S(p=True), JointAction([a, EPS])) == S(p=True, q=True)
    b = act("b", S(r=True))
    assert apply_joint(S(p=True), JointAction([a, b])) == UNDEFINED
    c = act("c", None, S(q=False))
    with pytest.raises(IllFormedJointAction):
        apply_joint(S(p=True), JointAction([a, c]))


def test_concat_examples():
    rng = random.Random(0)
    pool = [[random_action(rng, N_ATOMS, f"a{i}")] for i in range(2)]
    p1, p2 = random_plan(rng, pool, 2), random_plan(rng, pool, 3)
    assert p1.concat(Plan.empty(2)) == p1
    assert len(p1 + p2) == 5
    with pytest.raises(PlanError):
        p1.concat(Plan.empty(3))


def test_fragment_examples():
    rng = random.Random(1)
    pool = [[random_action(rng, N_ATOMS, f"a{i}{k}") for k in range(3)] for i in range(2)]
    p = random_plan(rng, pool, 5)
    assert p.fragment(1, len(p)) == p
    assert len(p.suffix(len(p) + 1)) == 0
    with pytest.raises(IndexError):
        p.fragment(3, 2)
    with pytest.raises(IndexError):
        p.fragment(0, 2)


def test_diff_examples():
    a, b = act("a"), act("b")
    pa = Plan.from_rows([[a]], 1)
    assert diff(pa, pa) == 0
    assert diff(pa, Plan.from_rows([[b]], 1)) == 1
    assert diff(pa, Plan.from_rows([[a], [EPS]], 1)) == 0
    with pytest.raises(PlanError):
        diff(pa, Plan.empty(2))


def test_classify_public_on_fixture():
    problem = fixtures.load("logistics2")
    public, private = classify_public(problem)
    assert {"t1.unload_B", "plane.load_B"} <= public
    assert "t1.move_A_B" in private
    labels = {a.label for ag in problem.agents for a in ag.actions}
    assert public | private == labels and not public & private


def test_classify_public_single_agent():
    problem = fixtures.load("trap")
    public, private = classify_public(problem)
    assert public == frozenset()
    assert len(private) == 2


def test_classify_public_symmetry():
    for seed in range(30):
        rng = random.Random(seed)
        agents = [Agent(f"g{i}", tuple(random_action(rng, N_ATOMS, f"g{i}.{k}") for k in range(3))) for i in range(3)]
        problem = Problem.build([f"x{i}" for i in range(N_ATOMS)], agents, State(), State())
        public, _ = classify_public(problem)
        for i, ag in enumerate(agents):
            for a in ag.actions:
                partners = [b for j, other in enumerate(agents) if j != i for b in other.actions if a.atoms & b.atoms]
                assert (a.label in public) == bool(partners)
                for b in partners:
                    assert b.label in public


def test_validate_fixture_plan_and_mutations():
    problem = fixtures.load("logistics2")
    plan = parse_plan(fixtures.path("logistics2.plan.csv").read_text(), problem)
    assert validate_plan(problem, plan) is None
    # unloading before the truck gets to B breaks step 2
    rows = plan.labels()
    rows[1], rows[2] = rows[2], rows[1]
    bad = Plan.from_rows([[problem.action(l) for l in r] for r in rows], 2)
    v = validate_plan(problem, bad)
    assert v.kind == "feasibility" and v.step == 2
    v = validate_plan(problem, plan.prefix(len(plan)))
    assert v.kind == "goal"


def test_validate_empty_plan_goal_in_init():
    problem = fixtures.load("logistics2")
    problem = problem.with_goal(problem.init)
    assert validate_plan(problem, Plan.empty(2)) is None


def test_validate_foreign_action():
    problem = fixtures.load("logistics2")
    plane_action = problem.action("plane.load_B")
    plan = Plan.from_rows([[plane_action, EPS]], 2)
    assert validate_plan(problem, plan).kind == "well-formedness"


def _pub(label):
    return GroundAction(label, 0, 0, 1, 0)


def test_min_coordination_k_examples():
    x, pub = act("x"), _pub("P")
    every = Plan.from_rows([[pub]] * 4, 1)
    assert min_coordination_k(every, {"P"}) == 1
    rows = [[x], [pub], [x], [x], [pub]]
    assert min_coordination_k(Plan.from_rows(rows, 1), {"P"}) == 3
    assert min_coordination_k(Plan.from_rows([[x]] * 3, 1), {"P"}) is None


def _k_by_enumeration(plan, public):
    n = len(plan)
    for k in range(1, n + 1):
        if all(
            any(p.label in public for j in plan.fragment(i, i + k - 1) for p in j)
            for i in range(1, n - k + 2)
        ):
            return k
    return None


def test_min_coordination_k_matches_enumeration():
    rng = random.Random(5)
    x, pub = act("x"), _pub("P")
    for _ in range(300):
        plan = Plan.from_rows([[rng.choice([x, x, pub])] for _ in range(rng.randint(1, 9))], 1)
        k = min_coordination_k(plan, {"P"})
        assert k == _k_by_enumeration(plan, {"P"})


def test_is_compressible_examples():
    problem = fixtures.load("logistics2")
    plan = parse_plan(fixtures.path("logistics2.plan.csv").read_text(), problem)
    idle = Plan.from_rows([[EPS, EPS], [EPS, EPS]], 2)
    assert is_compressible(problem, plan.prefix(3) + idle + plan.suffix(3))
    assert not is_compressible(problem, Plan.empty(2))
    with pytest.raises(ValueError):
        is_compressible(problem, plan + plan + plan, max_len=12)


def test_shortest_plan_is_not_compressible():
    # the fixture needs 6 sequential steps: load, move, unload, load, fly, unload
    # (the plane's flight to B overlaps the truck leg)
    problem = fixtures.load("logistics2")
    plan = parse_plan(fixtures.path("logistics2.plan.csv").read_text(), problem)
    assert not is_compressible(problem, plan)


@given(states(), actions())
def test_apply_preserves_consistency(s, a):
    t = apply(s, a)
    assert not t.defined or not (t.pos & t.neg)


@given(states())
def test_eps_identity(s):
    assert apply(s, EPS) == s


@given(states(), st.lists(actions(), max_size=4))
def test_chained_apply_equals_joint_fold(s, acts):
    # a single-agent plan is the fold of apply over its steps
    plan = Plan.from_rows([[a] for a in acts], 1)
    t = s
    for a in acts:
        t = apply(t, a)
    assert plan.final_state(s) == t


@settings(max_examples=200)
@given(st.integers(0, 10_000))
def test_diff_pseudometric(seed):
    rng = random.Random(seed)
    pool = [[random_action(rng, N_ATOMS, f"a{i}{k}") for k in range(2)] for i in range(2)]
    n = rng.randint(0, 6)
    p1, p2, p3 = (random_plan(rng, pool, n) for _ in range(3))
    assert diff(p1, p1) == 0
    assert diff(p1, p2) == diff(p2, p1)
    assert diff(p1, p3) <= diff(p1, p2) + diff(p2, p3)
    q = random_plan(rng, pool, rng.randint(0, 6))
    assert diff(p1, q) == diff(q, p1) >= 0


@settings(max_examples=200)
@given(st.integers(0, 10_000))
def test_fragment_roundtrip(seed):
    rng = random.Random(seed)
    pool = [[random_action(rng, N_ATOMS, f"a{i}{k}") for k in range(2)] for i in range(3)]
    p = random_plan(rng, pool, rng.randint(1, 8))
    i = rng.randint(1, len(p))
    j = rng.randint(i, len(p))
    assert p.prefix(i) + (p.fragment(i, j) + p.suffix(j + 1)) == p


def test_random_state_generator_is_consistent():
    rng = random.Random(0)
    for _ in range(100):
        s = random_state(rng, N_ATOMS)
        assert s.defined and not s.pos & s.neg
