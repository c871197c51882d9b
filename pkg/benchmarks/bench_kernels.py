"""Time the compiled relaxation kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N] [--packages P]

Both backends evaluate h_max/h_add and LM-cut on the same relaxed tasks,
built from generated logistics instances, and must agree on every value.
"""
from __future__ import annotations

import argparse
import random
import timeit

from maplan.benchmarks import BenchmarkParams, generate_benchmark
from maplan.kernels import BACKEND, PyRelaxedTask, RelaxedTask
from maplan.model import bits


def relaxed_inputs(packages: int, seed: int):
    problem = generate_benchmark(BenchmarkParams("logistics", 4, packages=packages, locations=3, seed=seed))
    st = problem.domain.structure
    acts = [a for ag in problem.agents for a in ag.actions]
    args = (
        len(problem.atoms),
        [bits(a.pre_pos) for a in acts],
        [bits(a.eff_pos) for a in acts],
        [1 if a.atoms & st.public_atoms else 0 for a in acts],
    )
    rng = random.Random(seed)
    n = len(problem.atoms)
    queries = []
    for _ in range(50):
        state = sorted(rng.sample(range(n), max(1, n // 4)))
        goal = sorted(rng.sample(range(n), 3))
        queries.append((state, goal))
    queries.append((bits(problem.init.pos), bits(problem.goal.pos)))
    return args, queries


def run(task_cls, args, queries):
    task = task_cls(*args)
    return [(task.both(s, g), task.lmcut(s, g)) for s, g in queries]


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--packages", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    opts = ap.parse_args(argv)
    args, queries = relaxed_inputs(opts.packages, opts.seed)
    print(f"compiled backend available: {BACKEND == 'cython'}; {args[0]} facts, {len(args[1])} actions, {len(queries)} queries")
    if run(RelaxedTask, args, queries) != run(PyRelaxedTask, args, queries):
        raise SystemExit("backends disagree")
    times = {}
    for name, cls in (("python", PyRelaxedTask), (BACKEND, RelaxedTask)):
        if name in times:
            continue
        best = min(timeit.repeat(lambda: run(cls, args, queries), number=1, repeat=opts.repeat))
        times[name] = best
        print(f"{name:>8}: {best * 1e3:9.2f} ms per pass")
    if "cython" in times:
        print(f" speedup: {times['python'] / times['cython']:.1f}x")


if __name__ == "__main__":
    main()
