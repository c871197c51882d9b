"""Sweeps over problems, repair strategies and failure probabilities.

A sweep spec uses the same s-expression dialect as problem files::

    (sweep tight-logistics
      (:problem :family logistics :agents 3 :packages 2 :seed 1 :instances 4)
      (:problem :file fixtures/logistics2.maplan)
      (:strategies replan bot repeated-lazy)
      (:failure action) (:c 1) (:max-drops 1)
      (:p 0.1 0.2 0.3 0.4)
      (:reps 20) (:seed 7)
      (:max-delta 8) (:budget 100000))

Every (problem, strategy, p) cell runs ``reps`` episodes.  Episode seeds are
``(base_seed << 32) | (cell << 16) | rep``, which is injective as long as
there are fewer than 65536 cells and repetitions.
"""
from __future__ import annotations

import csv
import io
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

from .benchmarks import BenchmarkParams, generate_benchmark
from .domainio import Sym, SList, load_problem, read_sexpr
from .errors import ParseError, PlanningFailure
from .model import Problem
from .planner import Limits, ma_plan
from .repair import STRATEGIES
from .simulation import FAILURE_KINDS, EpisodeReport, FailureModel, run_episode

METRICS = ("messages", "execution_length", "planner_expansions", "planner_nodes", "repairs", "reached_goal")
SEED_FIELD = 16


@dataclass(frozen=True)
class ProblemSource:
    params: BenchmarkParams | None = None
    path: str | None = None

    @property
    def domain(self) -> str:
        return self.params.family if self.params is not None else "file"

    def load(self) -> Problem:
        if self.params is not None:
            return generate_benchmark(self.params)
        return load_problem(self.path)


@dataclass
class SweepSpec:
    name: str = "sweep"
    problems: list[ProblemSource] = field(default_factory=list)
    strategies: tuple[str, ...] = ("replan", "bot", "repeated-lazy")
    p_values: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4)
    reps: int = 20
    base_seed: int = 0
    failure: str = "action"
    c: int = 1
    max_drops: int = 1
    limits: Limits = field(default_factory=Limits)

    def validate(self) -> None:
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not self.problems:
            raise ValueError("sweep lists no problems")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ValueError(f"unknown strategy {s!r}")
        if self.failure not in FAILURE_KINDS:
            raise ValueError(f"unknown failure kind {self.failure!r}")
        if self.reps >= 1 << SEED_FIELD or len(self.cells()) >= 1 << SEED_FIELD:
            raise ValueError("too many cells or repetitions for the seed schedule")

    def cells(self) -> list[tuple[int, str, float]]:
        return [(pi, s, p) for pi in range(len(self.problems)) for s in self.strategies for p in self.p_values]


def episode_seed(base_seed: int, cell: int, rep: int) -> int:
    return (base_seed << (2 * SEED_FIELD)) | (cell << SEED_FIELD) | rep


def _kv(items: list, where) -> dict[str, str]:
    out = {}
    if len(items) % 2:
        raise ParseError("expected :key value pairs", where.line, where.col)
    for k, v in zip(items[::2], items[1::2]):
        if not isinstance(k, Sym) or not k.text.startswith(":") or not isinstance(v, Sym):
            raise ParseError("expected :key value pairs", where.line, where.col)
        out[k.text[1:]] = v.text
    return out


_PARAM_KEYS = {"agents": "agent_count", "packages": "packages", "locations": "locations",
               "waypoints": "waypoints", "targets": "targets", "directions": "directions", "seed": "seed"}


def parse_sweep(text: str, base_dir: str | os.PathLike = ".") -> SweepSpec:
    top = read_sexpr(text)
    if not isinstance(top, SList) or not top.items or not isinstance(top.items[0], Sym) or top.items[0].text != "sweep":
        raise ParseError("sweep spec must start with (sweep ...)", top.line, top.col)
    spec = SweepSpec()
    rest = top.items[1:]
    if rest and isinstance(rest[0], Sym):
        spec.name = rest[0].text
        rest = rest[1:]
    limits = {}
    for sec in rest:
        if not isinstance(sec, SList) or not sec.items or not isinstance(sec.items[0], Sym):
            raise ParseError("expected (:section ...)", sec.line, sec.col)
        head = sec.items[0].text
        vals = [v.text for v in sec.items[1:] if isinstance(v, Sym)]
        try:
            if head == ":problem":
                kv = _kv(sec.items[1:], sec)
                if "file" in kv:
                    spec.problems.append(ProblemSource(path=str(Path(base_dir) / kv["file"])))
                    continue
                family = kv.pop("family", None)
                if family is None:
                    raise ParseError("problem needs :family or :file", sec.line, sec.col)
                instances = int(kv.pop("instances", "1"))
                args = {}
                for k, v in kv.items():
                    if k not in _PARAM_KEYS:
                        raise ParseError(f"unknown problem key :{k}", sec.line, sec.col)
                    args[_PARAM_KEYS[k]] = int(v)
                params = BenchmarkParams(family, **args)
                params.validate()
                for i in range(instances):
                    spec.problems.append(ProblemSource(params=replace(params, seed=params.seed + i)))
            elif head == ":strategies":
                spec.strategies = tuple(vals)
            elif head == ":p":
                spec.p_values = tuple(float(v) for v in vals)
            elif head == ":reps":
                spec.reps = int(vals[0])
            elif head == ":seed":
                spec.base_seed = int(vals[0])
            elif head == ":failure":
                spec.failure = vals[0]
            elif head == ":c":
                spec.c = int(vals[0])
            elif head == ":max-drops":
                spec.max_drops = int(vals[0])
            elif head == ":max-delta":
                limits["max_delta"] = int(vals[0])
            elif head == ":budget":
                limits["leg_budget"] = int(vals[0])
            elif head == ":node-budget":
                limits["node_budget"] = int(vals[0])
            else:
                raise ParseError(f"unknown sweep section {head}", sec.line, sec.col)
        except (IndexError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"bad value in {head}: {exc}", sec.line, sec.col) from None
    spec.limits = Limits(**limits)
    try:
        spec.validate()
    except ValueError as exc:
        raise ParseError(str(exc), top.line, top.col) from None
    return spec


def load_sweep(path) -> SweepSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_sweep(fh.read(), Path(path).parent)


@lru_cache(maxsize=64)
def _prepared(source: ProblemSource, limits: Limits):
    problem = source.load()
    try:
        initial = ma_plan(problem, limits)
    except PlanningFailure:
        initial = None
    return problem, initial


def _run_cell(args) -> list[tuple[int, int, EpisodeReport]]:
    cell, source, strategy, p, seeds, failure, c, max_drops, limits = args
    problem, initial = _prepared(source, limits)
    out = []
    for rep, seed in enumerate(seeds):
        model = FailureModel(failure, p, c, seed, max_drops)
        out.append((cell, rep, run_episode(problem, strategy, model, limits, initial)))
    return out


RAW_HEADER = ["cell", "rep", "domain"] + EpisodeReport.header()


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list  # (cell, rep, domain, EpisodeReport), sorted by (cell, rep)

    def raw_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RAW_HEADER)
        for cell, rep, domain, r in self.rows:
            w.writerow([cell, rep, domain] + r.row())
        return buf.getvalue()


def run_sweep(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    spec.validate()
    tasks = []
    for cell, (pi, strategy, p) in enumerate(spec.cells()):
        seeds = [episode_seed(spec.base_seed, cell, r) for r in range(spec.reps)]
        tasks.append((cell, spec.problems[pi], strategy, p, seeds, spec.failure, spec.c, spec.max_drops, spec.limits))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_cell, tasks))
    else:
        chunks = [_run_cell(t) for t in tasks]
    rows = []
    for chunk in chunks:
        for cell, rep, r in chunk:
            pi = spec.cells()[cell][0]
            rows.append((cell, rep, spec.problems[pi].domain, r))
    rows.sort(key=lambda x: (x[0], x[1]))
    return SweepResult(spec, rows)


def _stats(values: list[float]) -> tuple[float, float, float, float]:
    mean = math.fsum(values) / len(values)
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, min(values), max(values), sd


def ratio(num: float, den: float) -> float:
    """Strategy mean over replan mean; 1.0 when both are zero."""
    if den == 0:
        return 1.0 if num == 0 else math.inf
    return num / den


def read_raw(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def _metric(row: dict, m: str) -> float:
    return float(row[m])


def aggregate(raw_rows: list[dict]) -> list[dict]:
    """Per (problem, strategy, p) statistics plus ratios to the replan cell."""
    groups: dict[tuple, list[dict]] = {}
    order = []
    for r in raw_rows:
        key = (r["domain"], r["problem"], r["strategy"], r["p"])
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(r)
    out = []
    for key in order:
        rows = groups[key]
        domain, problem, strategy, p = key
        agg = {"domain": domain, "problem": problem, "strategy": strategy, "p": p, "n": len(rows)}
        base = groups.get((domain, problem, "replan", p))
        for m in METRICS:
            mean, lo, hi, sd = _stats([_metric(r, m) for r in rows])
            agg[f"{m}_mean"], agg[f"{m}_min"], agg[f"{m}_max"], agg[f"{m}_std"] = mean, lo, hi, sd
            if base is not None:
                agg[f"{m}_ratio"] = ratio(mean, math.fsum(_metric(r, m) for r in base) / len(base))
            else:
                agg[f"{m}_ratio"] = ""
        out.append(agg)
    return out


AGG_HEADER = ["domain", "problem", "strategy", "p", "n"] + [
    f"{m}_{k}" for m in METRICS for k in ("mean", "min", "max", "std", "ratio")
]


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def aggregate_csv(aggs: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGG_HEADER)
    for a in aggs:
        w.writerow([_fmt(a[h]) for h in AGG_HEADER])
    return buf.getvalue()


def family_ratios(raw_rows: list[dict], metric: str = "messages") -> dict[tuple[str, str, str], float]:
    """(domain, strategy, p) -> pooled strategy mean / pooled replan mean."""
    sums: dict[tuple, list[float]] = {}
    for r in raw_rows:
        sums.setdefault((r["domain"], r["strategy"], r["p"]), []).append(_metric(r, metric))
    out = {}
    for (domain, strategy, p), vals in sums.items():
        base = sums.get((domain, "replan", p))
        if base is None:
            continue
        out[(domain, strategy, p)] = ratio(math.fsum(vals) / len(vals), math.fsum(base) / len(base))
    return out


def sweep_means(ratios: dict[tuple[str, str, str], float]) -> dict[tuple[str, str], float]:
    """(domain, strategy) -> mean of its per-p ratios."""
    acc: dict[tuple[str, str], list[float]] = {}
    for (domain, strategy, _), v in ratios.items():
        acc.setdefault((domain, strategy), []).append(v)
    return {k: math.fsum(v) / len(v) for k, v in acc.items()}


def summary_text(raw_rows: list[dict]) -> str:
    lines = []
    for metric in ("messages", "execution_length", "planner_expansions"):
        ratios = family_ratios(raw_rows, metric)
        if not ratios:
            continue
        ps = sorted({k[2] for k in ratios}, key=float)
        keys = sorted({(k[0], k[1]) for k in ratios})
        lines.append(f"{metric}: strategy / replan, percent")
        head = f"{'domain':<12}{'strategy':<15}" + "".join(f"{'p=' + p:>10}" for p in ps) + f"{'mean':>10}"
        lines.append(head)
        means = sweep_means(ratios)
        for domain, strategy in keys:
            cells = "".join(f"{100 * ratios.get((domain, strategy, p), math.nan):>10.1f}" for p in ps)
            lines.append(f"{domain:<12}{strategy:<15}{cells}{100 * means[(domain, strategy)]:>10.1f}")
        lines.append("")
    return "\n".join(lines)


def write_outputs(result: SweepResult, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    raw = result.raw_csv()
    rows = read_raw(raw)
    paths = {"raw": out / "raw.csv", "aggregate": out / "aggregate.csv", "summary": out / "summary.txt"}
    paths["raw"].write_text(raw, encoding="utf-8")
    paths["aggregate"].write_text(aggregate_csv(aggregate(rows)), encoding="utf-8")
    paths["summary"].write_text(summary_text(rows), encoding="utf-8")
    return paths
