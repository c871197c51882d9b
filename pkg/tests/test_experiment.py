import importlib.resources
import math

import numpy as np
import pytest

from maplan import fixtures
from maplan.benchmarks import BenchmarkParams
from maplan.errors import ParseError
from maplan.experiment import (
    METRICS,
    ProblemSource,
    SweepSpec,
    aggregate,
    aggregate_csv,
    episode_seed,
    family_ratios,
    parse_sweep,
    read_raw,
    run_sweep,
    summary_text,
    sweep_means,
    write_outputs,
)
from maplan.planner import Limits

SWEEPS = importlib.resources.files("maplan") / "data" / "sweeps"

SMALL = """
(sweep small
  (:problem :family logistics :agents 2 :packages 1 :seed 3 :instances 2)
  (:problem :file logistics2.maplan)
  (:strategies replan bot lazy repeated-lazy)
  (:failure action)
  (:p 0.2 0.4)
  (:reps 4) (:seed 9)
  (:max-delta 6))
"""


@pytest.fixture(scope="module")
def small():
    spec = parse_sweep(SMALL, fixtures.path("logistics2").parent)
    return spec, run_sweep(spec)


def test_parse_sweep(small):
    spec, _ = small
    assert spec.name == "small"
    assert len(spec.problems) == 3
    assert spec.problems[1].params.seed == 4
    assert spec.problems[2].path.endswith("logistics2.maplan")
    assert spec.strategies == ("replan", "bot", "lazy", "repeated-lazy")
    assert spec.p_values == (0.2, 0.4)
    assert spec.reps == 4 and spec.base_seed == 9
    assert spec.limits.max_delta == 6
    assert len(spec.cells()) == 3 * 4 * 2


@pytest.mark.parametrize(
    "text",
    [
        "(plan x)",
        "(sweep x (:problem :family logistics) (:reps 0))",
        "(sweep x (:problem :family logistics) (:strategies replan magic))",
        "(sweep x (:problem :family logistics :colour 3))",
        "(sweep x (:problem :family logistics) (:p lots))",
        "(sweep x (:strategies replan))",
        "(sweep x (:problem :family logistics) (:warp 9))",
    ],
)
def test_parse_sweep_rejects(text):
    with pytest.raises(ParseError):
        parse_sweep(text)


def test_shipped_sweeps_parse():
    names = sorted(p.name for p in SWEEPS.iterdir())
    assert names == ["logistics-action.sweep", "logistics-perturb.sweep", "rovers-action.sweep", "satellites-action.sweep"]
    for name in names:
        spec = parse_sweep((SWEEPS / name).read_text())
        assert spec.reps >= 20 and spec.p_values == (0.1, 0.2, 0.3, 0.4)


def test_seed_schedule_is_injective():
    seeds = {episode_seed(5, c, r) for c in range(300) for r in range(50)}
    assert len(seeds) == 300 * 50
    assert episode_seed(5, 0, 0) != episode_seed(6, 0, 0)


def test_rows_sorted_and_complete(small):
    spec, result = small
    keys = [(c, r) for c, r, _, _ in result.rows]
    assert keys == sorted(keys)
    assert len(keys) == len(spec.cells()) * spec.reps
    seeds = [rep.seed for *_, rep in result.rows]
    assert len(set(seeds)) == len(seeds)


def test_rerun_is_byte_identical(small):
    spec, result = small
    assert run_sweep(spec).raw_csv() == result.raw_csv()


def test_parallel_matches_serial(small):
    spec, result = small
    assert run_sweep(spec, jobs=2).raw_csv() == result.raw_csv()


def _reference(raw_rows):
    """Aggregates recomputed with numpy, independently of the module."""
    table = {}
    for r in raw_rows:
        table.setdefault((r["domain"], r["problem"], r["strategy"], r["p"]), []).append(r)
    out = {}
    for key, rows in table.items():
        domain, problem, _, p = key
        base = table.get((domain, problem, "replan", p))
        for m in METRICS:
            v = np.array([float(r[m]) for r in rows])
            sd = float(np.std(v, ddof=1)) if len(v) > 1 else 0.0
            entry = [v.mean(), v.min(), v.max(), sd]
            if base is not None:
                b = np.array([float(r[m]) for r in base]).mean()
                entry.append(1.0 if b == 0 and v.mean() == 0 else v.mean() / b)
            out[key + (m,)] = entry
    return out


def _close(a, b):
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= 1e-9 * max(1.0, abs(b))


def test_aggregate_matches_reference(small):
    _, result = small
    raw = read_raw(result.raw_csv())
    ref = _reference(raw)
    # also go through the CSV text, which is what downstream users read
    emitted = read_raw(aggregate_csv(aggregate(raw)))
    assert len(emitted) == len({k[:4] for k in ref})
    for row in emitted:
        key = (row["domain"], row["problem"], row["strategy"], row["p"])
        for m in METRICS:
            got = [float(row[f"{m}_{k}"]) for k in ("mean", "min", "max", "std", "ratio")]
            exp = ref[key + (m,)]
            assert got[1] <= got[0] <= got[2] and got[3] >= 0
            assert all(_close(g, e) for g, e in zip(got, exp)), (key, m, got, exp)


def test_family_ratios_pool_instances(small):
    _, result = small
    raw = read_raw(result.raw_csv())
    ratios = family_ratios(raw, "messages")
    for (domain, strategy, p), v in ratios.items():
        num = [float(r["messages"]) for r in raw if (r["domain"], r["strategy"], r["p"]) == (domain, strategy, p)]
        den = [float(r["messages"]) for r in raw if (r["domain"], r["strategy"], r["p"]) == (domain, "replan", p)]
        assert _close(v, np.mean(num) / np.mean(den))
    means = sweep_means(ratios)
    assert _close(means[("logistics", "bot")], np.mean([ratios[("logistics", "bot", p)] for p in ("0.2", "0.4")]))
    assert means[("logistics", "replan")] == 1.0


def test_failure_free_ratios_are_one():
    spec = SweepSpec(
        problems=[ProblemSource(BenchmarkParams("logistics", 2, 1, seed=2))],
        strategies=("replan", "bot", "lazy", "repeated-lazy"),
        p_values=(0.0,),
        reps=1,
        failure="none",
        limits=Limits(max_delta=6),
    )
    raw = read_raw(run_sweep(spec).raw_csv())
    for agg in aggregate(raw):
        for m in METRICS:
            assert agg[f"{m}_ratio"] == 1.0
    assert set(family_ratios(raw).values()) == {1.0}


def test_write_outputs(tmp_path, small):
    _, result = small
    paths = write_outputs(result, tmp_path / "out")
    assert paths["raw"].read_text() == result.raw_csv()
    agg = paths["aggregate"].read_text().splitlines()
    assert agg[0].startswith("domain,problem,strategy,p,n,messages_mean")
    summary = paths["summary"].read_text()
    assert "messages: strategy / replan, percent" in summary
    assert summary == summary_text(read_raw(result.raw_csv()))
