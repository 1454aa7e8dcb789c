"""Random desk-scale scenarios for sweeps and property tests."""
from __future__ import annotations

import random
from dataclasses import asdict, dataclass

from .model import Task, TransportGraph
from .scenario_io import AgentSpec, FailureSpec, Params, Scenario
from .timebase import TICKS


@dataclass(frozen=True)
class GeneratorParams:
    max_steps: int = 6
    extra_caps: int = 1          # universe size = steps + extra_caps
    p_redundant: float = 0.8     # chance a step's capability gets a second holder
    p_extra: float = 0.2         # chance an agent picks up any other capability
    n_resources: int = 3
    fail_time: int = 10 * TICKS
    explicit: bool = False
    p_edge: float = 0.3          # extra directed edges in explicit mode

    def describe(self) -> str:
        return " ".join(f"{k}={v}" for k, v in asdict(self).items())


def agent_ids(n: int) -> list:
    return [f"a{i:02d}" for i in range(1, n + 1)]


def random_scenario(rng: random.Random, n_agents: int, n_failures: int = 1,
                    gen: GeneratorParams = GeneratorParams(), seed: int = 0) -> Scenario:
    ids = agent_ids(n_agents)
    k = rng.randint(min(max(n_failures, 1), n_agents, gen.max_steps), min(n_agents, gen.max_steps))
    universe = [f"c{i}" for i in range(1, k + gen.extra_caps + 1)]
    steps = [rng.choice(universe) for _ in range(k)]

    order = ids[:]
    rng.shuffle(order)
    step_of = {agent: i for i, agent in enumerate(order[:k])}
    caps = {agent: set() for agent in ids}
    for agent, step in step_of.items():
        caps[agent].add(steps[step])

    for cap in steps:
        holders = [a for a in ids if cap in caps[a]]
        if rng.random() < gen.p_redundant and len(holders) < 2:
            others = [a for a in ids if a not in holders]
            if others:
                caps[rng.choice(others)].add(cap)
    for agent in ids:
        for cap in universe:
            if cap not in caps[agent] and rng.random() < gen.p_extra:
                caps[agent].add(cap)
        if not caps[agent]:
            caps[agent].add(rng.choice(universe))

    working = sorted(step_of)
    failing = rng.sample(working, min(n_failures, len(working)))
    failures = tuple(FailureSpec(gen.fail_time, a, steps[step_of[a]]) for a in sorted(failing))

    transport = TransportGraph.full()
    if gen.explicit:
        edges = set()
        for i in range(k - 1):
            edges.add((order[i], order[i + 1]))
        # keep every agent reachable: attach each one to some earlier agent
        for i in range(1, n_agents):
            if not any(order[i] in e for e in edges):
                edges.add((order[rng.randrange(i)], order[i]))
        for a in ids:
            for b in ids:
                if a != b and rng.random() < gen.p_edge:
                    edges.add((a, b))
        transport = TransportGraph.explicit(edges)

    arrivals = tuple(i * 3 * TICKS for i in range(gen.n_resources))
    return Scenario(
        task=Task(tuple(steps)),
        agents=tuple(AgentSpec(a, frozenset(caps[a]), step_of.get(a)) for a in ids),
        params=Params(seed=seed, delay_per_hop=TICKS, proc_time=2 * TICKS),
        transport=transport,
        failures=failures,
        resources=arrivals,
    )


def scenario_for_seed(seed: int, n_agents: int, n_failures: int = 1,
                      gen: GeneratorParams = GeneratorParams()) -> Scenario:
    return random_scenario(random.Random(seed), n_agents, n_failures, gen, seed=seed)
