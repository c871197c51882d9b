"""Generators for the three benchmark families.

* logistics: trucks (one per city) and a plane hand packages over at
  airports, so public load/unload actions recur throughout a plan;
* rovers: each rover samples on its own waypoints and finally reports over
  one shared channel, so public actions only appear at the end;
* satellites: every atom belongs to a single satellite, so nothing is public.

All randomness comes from ``random.Random(seed)``, so a parameter set fully
determines the problem.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, replace

from .model import Agent, GroundAction, Problem, State

FAMILIES = ("logistics", "rovers", "satellites")


@dataclass(frozen=True)
class BenchmarkParams:
    family: str = "logistics"
    agent_count: int = 3
    packages: int = 2  # logistics
    locations: int = 2  # logistics: locations per city, airport included
    waypoints: int = 2  # rovers: waypoints per rover, base included
    targets: int = 1  # rovers/satellites: goals per agent
    directions: int = 3  # satellites: pointing directions per satellite
    seed: int = 0

    def validate(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if not 2 <= self.agent_count <= 6:
            raise ValueError("agent_count must be within 2..6")
        if self.family == "logistics":
            if self.locations < 2:
                raise ValueError("logistics needs at least 2 locations per city")
            if self.packages < 1:
                raise ValueError("logistics needs at least one package")
        elif self.family == "rovers":
            if self.waypoints < 2:
                raise ValueError("rovers need at least 2 waypoints")
            if not 1 <= self.targets <= self.waypoints - 1:
                raise ValueError("rovers need 1 <= targets < waypoints")
        elif self.family == "satellites":
            if self.directions < 2:
                raise ValueError("satellites need at least 2 directions")
            if not 1 <= self.targets <= self.directions - 1:
                raise ValueError("satellites need 1 <= targets < directions")


def minimal_params(family: str, agent_count: int | None = None, seed: int = 0) -> BenchmarkParams:
    """Smallest instance of a family at its default agent count."""
    default_agents = {"logistics": 3, "rovers": 3, "satellites": 3}[family]
    return BenchmarkParams(family, agent_count or default_agents, packages=1, seed=seed)


class _Builder:
    def __init__(self):
        self.atoms: list[str] = []
        self.index: dict[str, int] = {}

    def atom(self, name: str) -> int:
        i = self.index.get(name)
        if i is None:
            i = self.index[name] = len(self.atoms)
            self.atoms.append(name)
        return i

    def masks(self, names) -> tuple[int, int]:
        pos = neg = 0
        for n in names:
            if n.startswith("!"):
                neg |= 1 << self.atom(n[1:])
            else:
                pos |= 1 << self.atom(n)
        return pos, neg

    def action(self, label: str, pre, eff) -> GroundAction:
        return GroundAction(label, *self.masks(pre), *self.masks(eff))

    def state(self, names) -> State:
        return State(*self.masks(names))


def _logistics(p: BenchmarkParams, rng: random.Random) -> Problem:
    b = _Builder()
    n_trucks = p.agent_count - 1
    n_cities = max(2, n_trucks)
    cities = []
    for c in range(n_cities):
        air = f"c{c}a"
        others = [f"c{c}l{k}" for k in range(1, p.locations)] if c < n_trucks else []
        cities.append((air, others))
    airports = [air for air, _ in cities]
    packages = [f"p{k}" for k in range(p.packages)]

    agents = []
    init_terms = []
    for t in range(n_trucks):
        truck = f"t{t}"
        air, others = cities[t]
        locs = [air] + others
        acts = []
        for l1 in locs:
            for l2 in locs:
                if l1 != l2:
                    acts.append(b.action(f"{truck}.move_{l1}_{l2}", [f"at_{truck}_{l1}"], [f"at_{truck}_{l2}", f"!at_{truck}_{l1}"]))
        for pkg in packages:
            for l in locs:
                acts.append(b.action(f"{truck}.load_{pkg}_{l}", [f"at_{truck}_{l}", f"at_{pkg}_{l}"], [f"in_{pkg}_{truck}", f"!at_{pkg}_{l}"]))
                acts.append(b.action(f"{truck}.unload_{pkg}_{l}", [f"at_{truck}_{l}", f"in_{pkg}_{truck}"], [f"at_{pkg}_{l}", f"!in_{pkg}_{truck}"]))
        agents.append(Agent(truck, tuple(acts)))
        init_terms.append(f"at_{truck}_{rng.choice(locs)}")
    acts = []
    for a1 in airports:
        for a2 in airports:
            if a1 != a2:
                acts.append(b.action(f"plane.fly_{a1}_{a2}", [f"at_plane_{a1}"], [f"at_plane_{a2}", f"!at_plane_{a1}"]))
    for pkg in packages:
        for a in airports:
            acts.append(b.action(f"plane.load_{pkg}_{a}", [f"at_plane_{a}", f"at_{pkg}_{a}"], [f"in_{pkg}_plane", f"!at_{pkg}_{a}"]))
            acts.append(b.action(f"plane.unload_{pkg}_{a}", [f"at_plane_{a}", f"in_{pkg}_plane"], [f"at_{pkg}_{a}", f"!in_{pkg}_plane"]))
    agents.append(Agent("plane", tuple(acts)))
    init_terms.append(f"at_plane_{rng.choice(airports)}")

    goal_terms = []
    for pkg in packages:
        src_city = rng.randrange(n_trucks)
        dst_city = rng.choice([c for c in range(n_cities) if c != src_city])
        src = rng.choice(cities[src_city][1])
        dst_others = cities[dst_city][1]
        dst = rng.choice(dst_others) if dst_others else cities[dst_city][0]
        init_terms.append(f"at_{pkg}_{src}")
        goal_terms.append(f"at_{pkg}_{dst}")
    init = b.state(init_terms)
    goal = b.state(goal_terms)
    name = f"logistics-a{p.agent_count}-p{p.packages}-l{p.locations}-s{p.seed}"
    return Problem.build(b.atoms, agents, init, goal, name)


def _rovers(p: BenchmarkParams, rng: random.Random) -> Problem:
    b = _Builder()
    b.atom("channel_free")
    agents, init_terms, goal_terms = [], ["channel_free"], []
    for r in range(p.agent_count):
        rv = f"r{r}"
        wps = [f"{rv}w{k}" for k in range(p.waypoints)]
        base = wps[0]
        acts = []
        for k in range(len(wps) - 1):
            for w1, w2 in ((wps[k], wps[k + 1]), (wps[k + 1], wps[k])):
                acts.append(b.action(f"{rv}.navigate_{w1}_{w2}", [f"at_{rv}_{w1}"], [f"at_{rv}_{w2}", f"!at_{rv}_{w1}"]))
        for w in wps[1:]:
            acts.append(b.action(f"{rv}.sample_{w}", [f"at_{rv}_{w}", f"soil_{w}"], [f"have_{rv}_{w}", f"!soil_{w}"]))
            acts.append(
                b.action(f"{rv}.communicate_{w}", [f"at_{rv}_{base}", f"have_{rv}_{w}", "channel_free"], [f"sent_{w}"])
            )
        agents.append(Agent(rv, tuple(acts)))
        sites = sorted(rng.sample(wps[1:], p.targets))
        init_terms.append(f"at_{rv}_{base}")
        init_terms += [f"soil_{w}" for w in sites]
        goal_terms += [f"sent_{w}" for w in sites]
    name = f"rovers-a{p.agent_count}-w{p.waypoints}-t{p.targets}-s{p.seed}"
    return Problem.build(b.atoms, agents, b.state(init_terms), b.state(goal_terms), name)


def _satellites(p: BenchmarkParams, rng: random.Random) -> Problem:
    b = _Builder()
    agents, init_terms, goal_terms = [], [], []
    for s in range(p.agent_count):
        sat = f"s{s}"
        dirs = [f"{sat}d{k}" for k in range(p.directions)]
        calib = dirs[0]
        acts = []
        for d1 in dirs:
            for d2 in dirs:
                if d1 != d2:
                    acts.append(b.action(f"{sat}.turn_{d1}_{d2}", [f"point_{sat}_{d1}"], [f"point_{sat}_{d2}", f"!point_{sat}_{d1}"]))
        acts.append(b.action(f"{sat}.switch_on", [f"off_{sat}"], [f"on_{sat}", f"!off_{sat}", f"!calibrated_{sat}"]))
        acts.append(b.action(f"{sat}.calibrate", [f"on_{sat}", f"point_{sat}_{calib}"], [f"calibrated_{sat}"]))
        for d in dirs[1:]:
            acts.append(
                b.action(f"{sat}.take_image_{d}", [f"calibrated_{sat}", f"point_{sat}_{d}"], [f"image_{sat}_{d}"])
            )
        agents.append(Agent(sat, tuple(acts)))
        init_terms += [f"point_{sat}_{rng.choice(dirs)}", f"off_{sat}"]
        goal_terms += [f"image_{sat}_{d}" for d in sorted(rng.sample(dirs[1:], p.targets))]
    name = f"satellites-a{p.agent_count}-d{p.directions}-t{p.targets}-s{p.seed}"
    return Problem.build(b.atoms, agents, b.state(init_terms), b.state(goal_terms), name)


def generate_benchmark(params: BenchmarkParams) -> Problem:
    params.validate()
    rng = random.Random(params.seed)
    return {"logistics": _logistics, "rovers": _rovers, "satellites": _satellites}[params.family](params, rng)


def with_seed(params: BenchmarkParams, seed: int) -> BenchmarkParams:
    return replace(params, seed=seed)
