"""Deterministic discrete-event engine for one scenario run.

The engine owns the clock, the coordination medium and the resource flow.
Agents only change roles through their protocol state machines; the engine
observes the outcome to build metrics.
"""
from __future__ import annotations

import heapq
import itertools
import logging
from collections import Counter, deque
from dataclasses import dataclass, field, replace
from typing import Optional

from .coordination import CoordinationMedium
from .errors import RoutingError
from .model import DONE, Configuration, InTransit, TransportGraph
from .protocol import Mode, ProtocolConfig, WaveAgent, chain_changes, is_quiescent
from .scenario_io import Scenario

log = logging.getLogger(__name__)

FAILURE = "failure"
ARRIVAL = "arrival"
COMPLETE = "complete"
RETRY = "retry"


@dataclass(order=True)
class Event:
    time: int
    seq: int
    kind: str = field(compare=False)
    payload: tuple = field(compare=False, default=())


@dataclass
class ResourceState:
    id: str
    arrival: int
    next_step: int = 0
    location: object = None
    done_at: Optional[int] = None
    visits: list = field(default_factory=list)


@dataclass
class Metrics:
    seed: int
    converged: bool
    infeasible: bool
    t_last_failure: int
    t_quiescent: int
    n_messages: int
    n_role_changes: int
    locality_radius: Optional[int]
    resources_done: int
    resources_done_during_reconfig: int
    non_termination: bool = False

    @property
    def t_converge(self) -> int:
        return self.t_quiescent - self.t_last_failure


@dataclass
class RunResult:
    metrics: Metrics
    configuration: Configuration
    initial: Configuration
    agents: dict
    chains: list
    wave_messages: Counter
    attempt_messages: Counter   # keyed by (wave, attempt)
    completions: dict
    visits: dict
    trace: list
    snapshots: dict

    @property
    def chain_agents(self) -> set:
        return {link.agent for _, chain in self.chains for link in chain}


def compute_locality(pre: Configuration, post: Configuration, failing_agent: str,
                     transport: TransportGraph) -> Optional[int]:
    """Max distance from the failing agent over agents whose step changed.

    Role holders are measured in flow steps of the pre-failure line, idle
    agents in transport hops. None when nothing changed.
    """
    return _locality(pre, post, [failing_agent], transport)


def _locality(pre, post, origins, transport) -> Optional[int]:
    before, after = pre.agent_steps(), post.agent_steps()
    changed = [a for a in set(before) | set(after) if before.get(a) != after.get(a)]
    if not changed or not origins:
        return None

    def distance(origin, agent):
        if before.get(origin) is not None and before.get(agent) is not None:
            return abs(before[agent] - before[origin])
        hops = transport.hops(origin, agent)
        return 0 if hops is None else hops

    return max(min(distance(o, a) for o in origins) for a in changed)


class Simulation:
    def __init__(self, scenario: Scenario, seed: Optional[int] = None):
        self.scenario = scenario
        self.seed = scenario.params.seed if seed is None else seed
        p = scenario.params
        self.task = scenario.task
        self.k = len(self.task.steps)
        self.proc_time = p.proc_time
        self.delay = p.delay_per_hop
        self.t_max = p.t_max
        self.transport = scenario.transport
        self._seq = itertools.count()
        self.queue: list = []
        self.medium = CoordinationMedium(self.transport, self.delay, seq=self._seq)
        self.now = 0

        cfg = ProtocolConfig(
            agent_ids=scenario.agent_ids,
            transport=self.transport,
            delay_per_hop=self.delay,
            probe_scope=p.probe_scope,
            hop_budget=p.hop_budget,
        )
        self.initial = scenario.initial_configuration()
        directory = dict(self.initial.assignment)
        models = scenario.agent_map()
        self.agents: dict = {}
        for agent_id in scenario.agent_ids:
            wa = WaveAgent(models[agent_id], self.initial.role_of(agent_id), cfg, directory)
            self.agents[agent_id] = wa
            self.medium.attach_endpoint(agent_id, wa.receive)
        self.source = self.initial.assignment[0]

        self.buffers = {a: deque() for a in self.agents}
        self.processing = {a: None for a in self.agents}
        self.resources = []
        for i, t in enumerate(scenario.resources):
            r = ResourceState(f"r{i}", t)
            self.resources.append(r)
            self._schedule(t, ARRIVAL, (r, None))
        for f in scenario.failures:
            self._schedule(f.time, FAILURE, (f.agent, f.capability))

        self.chains: list = []
        self.origins: list = []
        self.wave_messages: Counter = Counter()
        self.attempt_messages: Counter = Counter()
        self.trace: list = []
        self.t_last_failure = 0
        self.t_protocol = 0
        self.resources_done = 0
        self.done_during_reconfig = 0
        self.stopped_early = False

    # ------------------------------------------------------------------ scheduling

    def _schedule(self, time: int, kind: str, payload: tuple) -> None:
        heapq.heappush(self.queue, Event(time, next(self._seq), kind, payload))

    def _send(self, sender: str, outbound) -> None:
        for to, msg in outbound:
            self.medium.send(sender, to, msg, self.now)
            self.wave_messages[msg.wave] += 1
            self.attempt_messages[msg.wave, msg.attempt] += 1

    def _next(self):
        head = self.queue[0] if self.queue else None
        pending = self.medium.peek()
        if pending is not None and (head is None or (pending.deliver_at, pending.seq) < (head.time, head.seq)):
            return pending.deliver_at, "delivery"
        if head is not None:
            return head.time, "event"
        return None, None

    def is_quiescent(self) -> bool:
        return is_quiescent(len(self.medium.pending), self.agents.values())

    # ------------------------------------------------------------------ main loop

    def run(self) -> RunResult:
        while True:
            time, source = self._next()
            if time is None:
                break
            if time > self.t_max:
                self.stopped_early = True
                break
            self.now = time
            if source == "delivery":
                self._deliver()
            else:
                self._dispatch(heapq.heappop(self.queue))
            self._collect()
            for agent_id in self.agents:
                self._pump(agent_id)
        return self._result()

    def _deliver(self) -> None:
        record = self.medium.deliver_next()
        env = record.envelope
        self.t_protocol = self.now
        self.trace.append((self.now, env.sender, env.to, env.payload.variant.value, str(env.payload.wave)))
        endpoint = self.medium.endpoints[env.to]
        for delivered, outbound in endpoint.drain(self.now):
            self._send(delivered.to, outbound)

    def _dispatch(self, ev: Event) -> None:
        if ev.kind == FAILURE:
            agent_id, cap = ev.payload
            self.t_last_failure = self.now
            self.t_protocol = self.now
            self._send(agent_id, self.agents[agent_id].on_capability_failure(cap, self.now))
        elif ev.kind == RETRY:
            agent_id, wave, token = ev.payload
            self.t_protocol = self.now
            self._send(agent_id, self.agents[agent_id].on_retry_timer(wave, token, self.now))
        elif ev.kind == ARRIVAL:
            r, agent_id = ev.payload
            agent_id = agent_id or self.source
            r.location = agent_id
            self.buffers[agent_id].append(r)
        elif ev.kind == COMPLETE:
            self._complete(*ev.payload)

    def _collect(self) -> None:
        for agent_id, wa in self.agents.items():
            for delay, wave, token in wa.drain_timers():
                self._schedule(self.now + delay, RETRY, (agent_id, wave, token))
            for entry in wa.drain_log():
                if entry[0] == "wave":
                    self.origins.append(agent_id)
                elif entry[0] == "commit":
                    _, wave, chain = entry
                    self.chains.append((wave, chain))
                    after = chain_changes(chain)
                    if 0 in after:
                        self.source = after[0]
                    log.debug("t=%s commit %s %s", self.now, wave, [l.as_tuple() for l in chain])
                elif entry[0] == "infeasible":
                    log.debug("t=%s infeasible %s", self.now, entry[1])

    # ------------------------------------------------------------------ resources

    def _pump(self, agent_id: str) -> None:
        wa = self.agents[agent_id]
        if not wa.can_work:
            return
        step = wa.role.step if wa.role is not None else None
        keep = deque()
        for r in self.buffers[agent_id]:
            if r.next_step == step:
                keep.append(r)
            else:
                self._forward(agent_id, r)
        self.buffers[agent_id] = keep
        if self.processing[agent_id] is None and keep:
            self.resource_step(agent_id, keep.popleft())

    def resource_step(self, agent_id: str, r: ResourceState) -> list:
        """Start processing ``r`` at ``agent_id``; returns the scheduled events."""
        wa = self.agents[agent_id]
        if r.location != agent_id or wa.role is None or wa.role.step != r.next_step:
            raise RoutingError(f"{r.id} needs step {r.next_step} but sits at {agent_id}")
        self.processing[agent_id] = r
        r.visits.append([agent_id, self.now, None])
        ev = Event(self.now + self.proc_time, next(self._seq), COMPLETE, (agent_id, r))
        heapq.heappush(self.queue, ev)
        return [ev]

    def _complete(self, agent_id: str, r: ResourceState) -> None:
        self.processing[agent_id] = None
        r.visits[-1][2] = self.now
        r.next_step += 1
        if r.next_step == self.k:
            r.location = DONE
            r.done_at = self.now
            self.resources_done += 1
            if not self.is_quiescent():
                self.done_during_reconfig += 1
        else:
            self.buffers[agent_id].appendleft(r)

    def _forward(self, agent_id: str, r: ResourceState) -> None:
        target = self.agents[agent_id].directory.get(r.next_step)
        if target is None or target == agent_id:
            raise RoutingError(f"{agent_id} has no route for {r.id} (step {r.next_step})")
        eta = self.now + self.transport.hops(agent_id, target) * self.delay
        r.location = InTransit(agent_id, target, eta)
        self._schedule(eta, ARRIVAL, (r, target))

    # ------------------------------------------------------------------ results

    def final_configuration(self) -> Configuration:
        assignment = {}
        for agent_id, wa in self.agents.items():
            if wa.role is not None:
                assignment[wa.role.step] = agent_id
        return Configuration.from_assignment(assignment, self.task)

    def _result(self) -> RunResult:
        quiescent = self.is_quiescent()
        halted = [a for a, wa in self.agents.items() if wa.mode is Mode.HALTED]
        final = self.final_configuration()
        before, after = self.initial.agent_steps(), final.agent_steps()
        changed = [a for a in self.agents if before.get(a) != after.get(a)]
        non_termination = not quiescent
        metrics = Metrics(
            seed=self.seed,
            converged=quiescent and not halted,
            infeasible=quiescent and bool(halted),
            t_last_failure=self.t_last_failure,
            t_quiescent=self.now if non_termination else max(self.t_protocol, self.t_last_failure),
            n_messages=self.medium.sent_count,
            n_role_changes=len(changed),
            locality_radius=_locality(self.initial, final, sorted(set(self.origins)), self.transport),
            resources_done=self.resources_done,
            resources_done_during_reconfig=self.done_during_reconfig,
            non_termination=non_termination,
        )
        return RunResult(
            metrics=metrics,
            configuration=final,
            initial=self.initial,
            agents={a: wa.agent for a, wa in self.agents.items()},
            chains=list(self.chains),
            wave_messages=Counter(self.wave_messages),
            attempt_messages=Counter(self.attempt_messages),
            completions={r.id: r.done_at for r in self.resources},
            visits={r.id: [tuple(v) for v in r.visits] for r in self.resources},
            trace=list(self.trace),
            snapshots={a: wa.snapshot() for a, wa in self.agents.items()},
        )


def run(scenario: Scenario, seed: Optional[int] = None) -> RunResult:
    return Simulation(scenario, seed).run()


def failure_free_twin(scenario: Scenario) -> Scenario:
    return replace(scenario, failures=())


def non_interference_violations(scenario: Scenario) -> list:
    """Resources that should be untouched by the reconfiguration but were not.

    A resource counts as unaffected when, in the failure-free twin run, it
    never sits at an agent of a committed chain at or after the first
    failure. Such resources must complete at exactly the same time.
    """
    faulty = run(scenario)
    twin = run(failure_free_twin(scenario))
    if not scenario.failures:
        return []
    t_fail = scenario.failures[0].time
    touched = faulty.chain_agents | set(
        a for a, snap in faulty.snapshots.items() if snap.mode is Mode.HALTED
    )
    bad = []
    for rid, visits in twin.visits.items():
        if twin.completions[rid] is None:
            continue
        late = [agent for agent, _, end in visits if end is None or end >= t_fail]
        if any(agent in touched for agent in late):
            continue
        if faulty.completions[rid] != twin.completions[rid]:
            bad.append((rid, twin.completions[rid], faulty.completions[rid]))
    return bad
