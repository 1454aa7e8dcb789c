"""Centralized brute-force reference for reconfiguration.

Two independent feasibility routes for full transport (exhaustive search
over injective assignments, and augmenting-path matching) are run side by
side and must agree. Explicit transport adds the consecutive-step adjacency
constraint, handled by backtracking.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Optional

from .errors import InfeasibleScenario, OracleCapExceeded
from .model import Agent, Configuration, Task, TransportGraph, TransportMode, actable

MAX_AGENTS = 12
MAX_STEPS = 8


@dataclass(frozen=True)
class OracleResult:
    feasible: bool
    witness: Optional[Configuration] = None
    min_changes: Optional[int] = None


def _check_caps(agents, task):
    if len(agents) > MAX_AGENTS or len(task.steps) > MAX_STEPS:
        raise OracleCapExceeded(
            f"oracle is limited to {MAX_AGENTS} agents and {MAX_STEPS} steps "
            f"(got {len(agents)} agents, {len(task.steps)} steps)"
        )


def _compatibility(agents: Mapping[str, Agent], task: Task) -> list:
    ids = sorted(agents)
    return [[a for a in ids if actable(agents[a], cap)] for cap in task.steps]


def exhaustive_assignment(agents: Mapping[str, Agent], task: Task) -> Optional[dict]:
    """Enumerate injective step->agent maps in order; first valid one or None.

    Sub-searches over (step, used agents) that already failed are memoised,
    so the enumeration stays exhaustive but never repeats work.
    """
    ids = sorted(agents)
    k = len(task.steps)
    able = [[actable(agents[a], cap) for a in ids] for cap in task.steps]

    @lru_cache(maxsize=None)
    def search(step: int, used: int):
        if step == k:
            return ()
        for i in range(len(ids)):
            if not used & (1 << i) and able[step][i]:
                rest = search(step + 1, used | (1 << i))
                if rest is not None:
                    return (ids[i],) + rest
        return None

    found = search(0, 0)
    return None if found is None else dict(enumerate(found))


def matching_assignment(agents: Mapping[str, Agent], task: Task) -> Optional[dict]:
    """Kuhn's augmenting-path maximum matching between steps and agents."""
    compat = _compatibility(agents, task)
    holder_of = {}  # agent -> step

    def augment(step: int, seen: set) -> bool:
        for agent in compat[step]:
            if agent in seen:
                continue
            seen.add(agent)
            if agent not in holder_of or augment(holder_of[agent], seen):
                holder_of[agent] = step
                return True
        return False

    for step in range(len(task.steps)):
        if not augment(step, set()):
            return None
    return {step: agent for agent, step in holder_of.items()}


def explicit_assignment(agents: Mapping[str, Agent], task: Task,
                        transport: TransportGraph) -> Optional[dict]:
    """Backtracking over step holders with transport edges between neighbours."""
    ids = sorted(agents)
    k = len(task.steps)
    able = [[actable(agents[a], cap) for a in ids] for cap in task.steps]

    @lru_cache(maxsize=None)
    def search(step: int, used: int, prev: int):
        if step == k:
            return ()
        for i in range(len(ids)):
            if used & (1 << i) or not able[step][i]:
                continue
            if prev >= 0 and not transport.has_edge(ids[prev], ids[i]):
                continue
            rest = search(step + 1, used | (1 << i), i)
            if rest is not None:
                return (ids[i],) + rest
        return None

    found = search(0, 0, -1)
    return None if found is None else dict(enumerate(found))


def _changes_search(agents, task, transport, current: Configuration, budget: int):
    """Depth-first search for a valid assignment changing at most ``budget`` agents.

    An agent counts as changed when its final step differs from its current
    one: either it takes a different step, or it held a step and ends idle.
    Each agent is charged exactly once, so the cost is additive.
    """
    ids = sorted(agents)
    k = len(task.steps)
    pre = current.agent_steps()
    able = [[actable(agents[a], cap) for a in ids] for cap in task.steps]
    explicit = transport.mode is TransportMode.EXPLICIT
    failed = {}  # (step, used, prev) -> largest remaining budget known to fail

    def search(step, used, prev, left):
        if left < 0:
            return None
        if step == k:
            idle_losses = sum(1 for i, a in enumerate(ids)
                              if not used & (1 << i) and pre.get(a) is not None)
            return () if idle_losses <= left else None
        key = (step, used, prev)
        if failed.get(key, -1) >= left:
            return None
        for i in range(len(ids)):
            if used & (1 << i) or not able[step][i]:
                continue
            if explicit and prev >= 0 and not transport.has_edge(ids[prev], ids[i]):
                continue
            cost = 0 if pre.get(ids[i]) == step else 1
            rest = search(step + 1, used | (1 << i), i, left - cost)
            if rest is not None:
                return (ids[i],) + rest
        failed[key] = left
        return None

    found = search(0, 0, -1, budget)
    return None if found is None else dict(enumerate(found))


def feasible(agents: Mapping[str, Agent], task: Task, transport: TransportGraph,
             current: Optional[Configuration] = None) -> OracleResult:
    """Can every step be given to a distinct agent that can still act it?

    ``agents`` carry their broken capabilities. With ``current`` given the
    witness is a minimum-change reconfiguration and ``min_changes`` is set.
    """
    _check_caps(agents, task)
    if transport.mode is TransportMode.FULL:
        by_search = exhaustive_assignment(agents, task)
        by_matching = matching_assignment(agents, task)
        if (by_search is None) != (by_matching is None):
            raise AssertionError("exhaustive search and matching disagree on feasibility")
        assignment = by_search
    else:
        assignment = explicit_assignment(agents, task, transport)
    if assignment is None:
        return OracleResult(False)
    if current is None:
        return OracleResult(True, Configuration.from_assignment(assignment, task))
    best, witness = _min_changes(agents, task, transport, current)
    return OracleResult(True, witness, best)


def _min_changes(agents, task, transport, current):
    for budget in range(len(agents) + 1):
        found = _changes_search(agents, task, transport, current, budget)
        if found is not None:
            return budget, Configuration.from_assignment(found, task)
    raise InfeasibleScenario("no valid configuration exists")


def min_changes(current: Configuration, agents: Mapping[str, Agent], task: Task,
                transport: TransportGraph) -> int:
    """Fewest agents whose step must differ from ``current`` (iterative deepening)."""
    result = feasible(agents, task, transport)
    if not result.feasible:
        raise InfeasibleScenario("min_changes needs a feasible scenario")
    best, _ = _min_changes(agents, task, transport, current)
    return best
