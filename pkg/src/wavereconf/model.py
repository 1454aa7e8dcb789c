"""Domain types of the resource-flow world and configuration checks.

Agents hold at most one role (a task step). A configuration maps every task
step to a distinct agent and wires step ``i`` to step ``i + 1``.
"""
from __future__ import annotations

import enum
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .errors import BrokenChain, UnknownAgent, UnknownCapability

TOKEN = re.compile(r"^[A-Za-z0-9_]+$")


class AgentState(enum.Enum):
    WORKING = "Working"
    DEFICIENT = "Deficient"
    TENTATIVE = "Tentative"
    IDLE = "Idle"


@dataclass(frozen=True)
class Task:
    steps: tuple

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise ValueError("a task needs at least one step")

    def __len__(self):
        return len(self.steps)


@dataclass(frozen=True)
class Agent:
    id: str
    capabilities: frozenset
    broken: frozenset = frozenset()
    state: AgentState = AgentState.WORKING

    def __post_init__(self):
        object.__setattr__(self, "capabilities", frozenset(self.capabilities))
        object.__setattr__(self, "broken", frozenset(self.broken))
        if not self.broken <= self.capabilities:
            raise ValueError(f"{self.id}: broken capabilities must be held")

    @property
    def actable_capabilities(self) -> frozenset:
        return self.capabilities - self.broken

    def with_broken(self, capability: str) -> "Agent":
        if capability not in self.capabilities:
            raise UnknownCapability(capability)
        return Agent(self.id, self.capabilities, self.broken | {capability}, self.state)


@dataclass(frozen=True)
class Role:
    step: int
    required: str
    predecessors: frozenset = frozenset()
    successors: frozenset = frozenset()

    @property
    def assignment(self) -> tuple:
        """The part of a role that identifies the job, ignoring flow wiring."""
        return (self.step, self.required)


def actable(agent: Agent, capability: str, universe: Optional[Iterable[str]] = None) -> bool:
    if universe is not None and capability not in universe:
        raise UnknownCapability(capability)
    return capability in agent.capabilities and capability not in agent.broken


class TransportMode(enum.Enum):
    FULL = "full"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class TransportGraph:
    """Who can hand resources (and messages) to whom.

    Hop distances use the undirected closure of the edges; validity of a
    wiring edge uses the directed edge set.
    """

    mode: TransportMode = TransportMode.FULL
    edges: frozenset = frozenset()
    _dist: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "edges", frozenset(tuple(e) for e in self.edges))
        if self.mode is TransportMode.FULL and self.edges:
            raise ValueError("full transport takes no explicit edges")

    @classmethod
    def full(cls) -> "TransportGraph":
        return cls(TransportMode.FULL)

    @classmethod
    def explicit(cls, edges) -> "TransportGraph":
        return cls(TransportMode.EXPLICIT, frozenset(edges))

    def has_edge(self, src: str, dst: str) -> bool:
        if self.mode is TransportMode.FULL:
            return src != dst
        return (src, dst) in self.edges

    def _bfs(self, src):
        adj = {}
        for a, b in self.edges:
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
        dist = {src: 0}
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in sorted(adj.get(u, ())):
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def hops(self, src: str, dst: str) -> Optional[int]:
        """Shortest hop count, or None when unreachable."""
        if src == dst:
            return 0
        if self.mode is TransportMode.FULL:
            return 1
        if src not in self._dist:
            self._dist[src] = self._bfs(src)
        return self._dist[src].get(dst)

    def connected(self, agent_ids: Iterable[str]) -> bool:
        ids = list(agent_ids)
        if self.mode is TransportMode.FULL or len(ids) <= 1:
            return True
        return all(self.hops(ids[0], other) is not None for other in ids[1:])


@dataclass(frozen=True)
class Configuration:
    """Step assignment plus the derived chain wiring, keyed by step."""

    assignment: Mapping[int, str]
    wiring: Mapping[int, Role]

    @classmethod
    def from_assignment(cls, assignment: Mapping[int, str], task: Task) -> "Configuration":
        assignment = {int(s): a for s, a in sorted(assignment.items())}
        wiring = {}
        for step, agent in assignment.items():
            pred = assignment.get(step - 1)
            succ = assignment.get(step + 1)
            wiring[step] = Role(
                step=step,
                required=task.steps[step],
                predecessors=frozenset([pred]) if pred is not None else frozenset(),
                successors=frozenset([succ]) if succ is not None else frozenset(),
            )
        return cls(assignment, wiring)

    def step_of(self, agent_id: str) -> Optional[int]:
        for step, holder in self.assignment.items():
            if holder == agent_id:
                return step
        return None

    def role_of(self, agent_id: str) -> Optional[Role]:
        step = self.step_of(agent_id)
        return None if step is None else self.wiring[step]

    def agent_steps(self) -> dict:
        return {a: s for s, a in self.assignment.items()}


@dataclass(frozen=True)
class Violation:
    clause: str  # "a" total+injective, "b" actable, "c" wiring, "d" transport
    step: Optional[int]
    detail: str

    def __str__(self):
        where = "" if self.step is None else f" at step {self.step}"
        return f"clause ({self.clause}){where}: {self.detail}"


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    violations: tuple = ()


@dataclass(frozen=True)
class Resource:
    id: str
    next_step: int = 0
    location: object = None  # agent id, InTransit, or DONE

    def is_done(self, k: int) -> bool:
        return self.next_step == k


@dataclass(frozen=True)
class InTransit:
    src: str
    dst: str
    eta: int


DONE = "Done"


def validate_configuration(
    config: Configuration,
    task: Task,
    agents: Mapping[str, Agent],
    transport: TransportGraph,
) -> ValidityReport:
    for agent_id in config.assignment.values():
        if agent_id not in agents:
            raise UnknownAgent(agent_id)

    violations = []
    k = len(task.steps)
    assignment = config.assignment

    for step in range(k):
        if step not in assignment:
            violations.append(Violation("a", step, "step unassigned"))
    for step in assignment:
        if not 0 <= step < k:
            violations.append(Violation("a", step, "step outside the task"))
    seen = {}
    for step, agent_id in sorted(assignment.items()):
        if agent_id in seen:
            violations.append(
                Violation("a", step, f"{agent_id} also holds step {seen[agent_id]}")
            )
        else:
            seen[agent_id] = step

    for step, agent_id in sorted(assignment.items()):
        if 0 <= step < k and not actable(agents[agent_id], task.steps[step]):
            violations.append(
                Violation("b", step, f"{agent_id} cannot act {task.steps[step]}")
            )

    for step, agent_id in sorted(assignment.items()):
        if not 0 <= step < k:
            continue
        role = config.wiring.get(step)
        pred = assignment.get(step - 1)
        succ = assignment.get(step + 1)
        want_pred = frozenset([pred]) if pred is not None else frozenset()
        want_succ = frozenset([succ]) if succ is not None else frozenset()
        if (
            role is None
            or role.step != step
            or role.required != task.steps[step]
            or role.predecessors != want_pred
            or role.successors != want_succ
        ):
            violations.append(Violation("c", step, "wiring is not the step chain"))

    if transport.mode is TransportMode.EXPLICIT:
        for step in range(k - 1):
            src, dst = assignment.get(step), assignment.get(step + 1)
            if src is not None and dst is not None and not transport.has_edge(src, dst):
                violations.append(Violation("d", step, f"no transport edge {src} -> {dst}"))

    return ValidityReport(not violations, tuple(violations))


def apply_chain(config: Configuration, chain, task: Task) -> Configuration:
    """Move each listed agent to its new step (``None`` = becomes idle).

    The moves must form a closed reallocation: afterwards the assigned steps
    are exactly the steps assigned before, each held by one agent.
    """
    chain = list(chain)
    if not chain:
        return config
    movers = [agent for agent, _ in chain]
    if len(set(movers)) != len(movers):
        raise BrokenChain("an agent appears twice in the chain")

    by_agent = config.agent_steps()
    new_by_agent = dict(by_agent)
    for agent, new_step in chain:
        if new_step is None:
            new_by_agent.pop(agent, None)
        else:
            if not 0 <= new_step < len(task.steps):
                raise BrokenChain(f"step {new_step} is outside the task")
            new_by_agent[agent] = new_step

    new_assignment = {}
    for agent, step in new_by_agent.items():
        if step in new_assignment:
            raise BrokenChain(f"step {step} claimed by {new_assignment[step]} and {agent}")
        new_assignment[step] = agent
    if set(new_assignment) != set(config.assignment):
        missing = sorted(set(config.assignment) - set(new_assignment))
        raise BrokenChain(f"steps left unassigned: {missing}")
    return Configuration.from_assignment(new_assignment, task)
