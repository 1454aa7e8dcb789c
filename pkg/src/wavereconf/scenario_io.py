"""Scenario files, metrics CSV and trajectory CSV.

Scenario format (one directive per line, ``#`` starts a comment)::

    [params]
    seed = 0
    delay_per_hop = 1
    proc_time = 5
    t_max = 1000000
    probe_scope = all
    hop_budget = unlimited
    [task]
    steps = c1, c2, c3
    [agents]
    a1 : c1, c2 : 0
    a4 : c1 : -
    [transport]
    mode = explicit
    a1 -> a2
    [failures]
    10 : a1 : c1
    [resources]
    0

Sections must appear in this order. ``[task]`` and ``[agents]`` are
required; the others fall back to defaults.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import (
    DuplicateAgentId,
    InvalidInitialConfig,
    ScenarioSyntaxError,
    UnknownAgentRef,
    UnknownCapabilityRef,
)
from .model import (
    TOKEN,
    Agent,
    Configuration,
    Task,
    TransportGraph,
    TransportMode,
    Violation,
    validate_configuration,
)
from .timebase import TICKS, format_decimal, parse_decimal

SECTIONS = ("params", "task", "agents", "transport", "failures", "resources")
PROBE_SCOPES = ("flow", "all")


@dataclass(frozen=True)
class Params:
    seed: int = 0
    delay_per_hop: int = TICKS
    proc_time: int = TICKS
    t_max: int = 1_000_000 * TICKS
    probe_scope: str = "all"
    hop_budget: Optional[int] = None


@dataclass(frozen=True)
class AgentSpec:
    id: str
    capabilities: frozenset
    step: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "capabilities", frozenset(self.capabilities))


@dataclass(frozen=True)
class FailureSpec:
    time: int
    agent: str
    capability: str


@dataclass(frozen=True)
class Scenario:
    task: Task
    agents: tuple
    params: Params = field(default_factory=Params)
    transport: TransportGraph = field(default_factory=TransportGraph.full)
    failures: tuple = ()
    resources: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(sorted(self.agents, key=lambda a: a.id)))
        object.__setattr__(self, "failures", tuple(self.failures))
        object.__setattr__(self, "resources", tuple(sorted(self.resources)))

    @property
    def agent_ids(self) -> tuple:
        return tuple(a.id for a in self.agents)

    def universe(self) -> frozenset:
        caps = set(self.task.steps)
        for a in self.agents:
            caps |= a.capabilities
        return frozenset(caps)

    def agent_map(self, broken: Optional[dict] = None) -> dict:
        broken = broken or {}
        return {a.id: Agent(a.id, a.capabilities, broken.get(a.id, frozenset()))
                for a in self.agents}

    def broken_after_failures(self) -> dict:
        broken = {}
        for f in self.failures:
            broken.setdefault(f.agent, set()).add(f.capability)
        return {k: frozenset(v) for k, v in broken.items()}

    def initial_configuration(self) -> Configuration:
        return Configuration.from_assignment(
            {a.step: a.id for a in self.agents if a.step is not None}, self.task
        )

    def with_configuration(self, config: Configuration) -> "Scenario":
        steps = config.agent_steps()
        agents = tuple(replace(a, step=steps.get(a.id)) for a in self.agents)
        return replace(self, agents=agents, failures=())


def static_check(scenario: Scenario) -> None:
    """Checks for scenarios built in code (errors report line 0)."""
    ids = [a.id for a in scenario.agents]
    if len(set(ids)) != len(ids):
        raise DuplicateAgentId(0, "duplicate agent id")
    _check_world(scenario, lambda *_: 0)


def _check_world(s: Scenario, line_of) -> None:
    ids = set(s.agent_ids)
    universe = s.universe()
    for f in s.failures:
        if f.agent not in ids:
            raise UnknownAgentRef(line_of("failure", f), f"unknown agent {f.agent}")
        if f.capability not in universe:
            raise UnknownCapabilityRef(line_of("failure", f), f"unknown capability {f.capability}")
        if f.capability not in s.agent_map()[f.agent].capabilities:
            raise UnknownCapabilityRef(line_of("failure", f),
                                       f"{f.agent} does not hold {f.capability}")
    times = [f.time for f in s.failures]
    if times != sorted(times):
        raise ScenarioSyntaxError(line_of("failure", s.failures[-1]), "failure times must be sorted")
    if not s.transport.connected(s.agent_ids):
        raise InvalidInitialConfig(line_of("transport", None),
                                   [Violation("d", None, "transport graph is not connected")])
    steps_bad = [Violation("a", a.step, f"{a.id} holds a step outside the task")
                 for a in s.agents if a.step is not None and not 0 <= a.step < len(s.task.steps)]
    if steps_bad:
        raise InvalidInitialConfig(line_of("agent", steps_bad[0].step), steps_bad)
    holder = {}
    for a in s.agents:
        if a.step is None:
            continue
        if a.step in holder:
            clash = Violation("a", a.step, f"{holder[a.step]} and {a.id} both hold step {a.step}")
            raise InvalidInitialConfig(line_of("agent", a.step), [clash])
        holder[a.step] = a.id
    report = validate_configuration(s.initial_configuration(), s.task, s.agent_map(), s.transport)
    if not report.valid:
        raise InvalidInitialConfig(line_of("agent", report.violations[0].step), report.violations)


def _split(text: str, sep: str, line: int, n: int) -> list:
    parts = [p.strip() for p in text.split(sep)]
    if len(parts) != n:
        raise ScenarioSyntaxError(line, f"expected {n} fields separated by {sep!r}")
    return parts


def _token(text: str, line: int, what: str) -> str:
    if not TOKEN.match(text):
        raise ScenarioSyntaxError(line, f"bad {what} {text!r}")
    return text


def _token_list(text: str, line: int, what: str) -> list:
    items = [t.strip() for t in text.split(",")]
    return [_token(t, line, what) for t in items]


def _uint(text: str, line: int) -> int:
    if not text.isdigit():
        raise ScenarioSyntaxError(line, f"expected an unsigned integer, got {text!r}")
    return int(text)


def _decimal(text: str, line: int) -> int:
    try:
        return parse_decimal(text)
    except ValueError as exc:
        raise ScenarioSyntaxError(line, str(exc)) from None


def _key_value(text: str, line: int) -> tuple:
    if "=" not in text:
        raise ScenarioSyntaxError(line, "expected 'key = value'")
    key, value = (p.strip() for p in text.split("=", 1))
    return key, value


def parse_scenario(text: str) -> Scenario:
    params = {}
    steps = None
    agents = []
    agent_lines = {}
    mode = None
    edges = []
    failures = []
    failure_lines = {}
    resources = []
    section = None
    seen_sections = []
    section_lines = {}

    lines = text.splitlines()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        line = line.strip()
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioSyntaxError(lineno, f"malformed section header {line!r}")
            name = line[1:-1].strip()
            if name not in SECTIONS:
                raise ScenarioSyntaxError(lineno, f"unknown section [{name}]")
            if name in seen_sections:
                raise ScenarioSyntaxError(lineno, f"section [{name}] repeated")
            if seen_sections and SECTIONS.index(name) < SECTIONS.index(seen_sections[-1]):
                raise ScenarioSyntaxError(lineno, f"section [{name}] out of order")
            seen_sections.append(name)
            section_lines[name] = lineno
            section = name
            continue
        if section is None:
            raise ScenarioSyntaxError(lineno, "directive outside of a section")

        if section == "params":
            key, value = _key_value(line, lineno)
            if key in params:
                raise ScenarioSyntaxError(lineno, f"parameter {key} repeated")
            if key == "seed":
                params[key] = _uint(value, lineno)
            elif key in ("delay_per_hop", "proc_time", "t_max"):
                params[key] = _decimal(value, lineno)
                if key == "delay_per_hop" and params[key] == 0:
                    raise ScenarioSyntaxError(lineno, "delay_per_hop must be positive")
            elif key == "probe_scope":
                if value not in PROBE_SCOPES:
                    raise ScenarioSyntaxError(lineno, f"probe_scope must be flow or all, got {value!r}")
                params[key] = value
            elif key == "hop_budget":
                params[key] = None if value == "unlimited" else _uint(value, lineno)
            else:
                raise ScenarioSyntaxError(lineno, f"unknown parameter {key!r}")
        elif section == "task":
            key, value = _key_value(line, lineno)
            if key != "steps":
                raise ScenarioSyntaxError(lineno, f"unknown task key {key!r}")
            if steps is not None:
                raise ScenarioSyntaxError(lineno, "steps repeated")
            steps = _token_list(value, lineno, "capability")
        elif section == "agents":
            agent_id, caps, step = _split(line, ":", lineno, 3)
            agent_id = _token(agent_id, lineno, "agent id")
            if agent_id in agent_lines:
                raise DuplicateAgentId(lineno, f"agent {agent_id} defined twice")
            agent_lines[agent_id] = lineno
            agents.append(AgentSpec(agent_id, frozenset(_token_list(caps, lineno, "capability")),
                                    None if step == "-" else _uint(step, lineno)))
        elif section == "transport":
            if mode is None:
                key, value = _key_value(line, lineno)
                if key != "mode":
                    raise ScenarioSyntaxError(lineno, "transport section must start with mode")
                if value not in ("full", "explicit"):
                    raise ScenarioSyntaxError(lineno, f"unknown transport mode {value!r}")
                mode = TransportMode(value)
                continue
            if mode is TransportMode.FULL:
                raise ScenarioSyntaxError(lineno, "edges are only allowed in explicit mode")
            src, dst = _split(line, "->", lineno, 2)
            src, dst = _token(src, lineno, "agent id"), _token(dst, lineno, "agent id")
            for ref in (src, dst):
                if ref not in agent_lines:
                    raise UnknownAgentRef(lineno, f"unknown agent {ref}")
            edges.append((src, dst))
        elif section == "failures":
            time, agent_id, cap = _split(line, ":", lineno, 3)
            f = FailureSpec(_decimal(time, lineno), _token(agent_id, lineno, "agent id"),
                            _token(cap, lineno, "capability"))
            if failures and f.time < failures[-1].time:
                raise ScenarioSyntaxError(lineno, "failure times must be sorted")
            failures.append(f)
            failure_lines.setdefault(f, lineno)
        elif section == "resources":
            resources.append(_decimal(line, lineno))

    end = len(lines) + 1
    if steps is None:
        raise ScenarioSyntaxError(section_lines.get("task", end), "missing [task] steps")
    if not agents:
        raise ScenarioSyntaxError(section_lines.get("agents", end), "missing [agents]")

    transport = TransportGraph.explicit(edges) if mode is TransportMode.EXPLICIT else TransportGraph.full()
    scenario = Scenario(
        task=Task(tuple(steps)),
        agents=tuple(agents),
        params=Params(**params),
        transport=transport,
        failures=tuple(failures),
        resources=tuple(resources),
    )

    step_lines = {a.step: agent_lines[a.id] for a in agents if a.step is not None}

    def line_of(kind, ref):
        if kind == "failure":
            return failure_lines.get(ref, section_lines.get("failures", end))
        if kind == "transport":
            return section_lines.get("transport", end)
        return step_lines.get(ref, section_lines["agents"])

    _check_world(scenario, line_of)
    return scenario


def serialize_scenario(s: Scenario, comments=()) -> str:
    p = s.params
    out = [f"# {c}" for c in comments]
    out += [
        "[params]",
        f"seed = {p.seed}",
        f"delay_per_hop = {format_decimal(p.delay_per_hop)}",
        f"proc_time = {format_decimal(p.proc_time)}",
        f"t_max = {format_decimal(p.t_max)}",
        f"probe_scope = {p.probe_scope}",
        f"hop_budget = {'unlimited' if p.hop_budget is None else p.hop_budget}",
        "[task]",
        "steps = " + ", ".join(s.task.steps),
        "[agents]",
    ]
    for a in sorted(s.agents, key=lambda a: a.id):
        step = "-" if a.step is None else str(a.step)
        out.append(f"{a.id} : {', '.join(sorted(a.capabilities))} : {step}")
    out += ["[transport]", f"mode = {s.transport.mode.value}"]
    out += [f"{src} -> {dst}" for src, dst in sorted(s.transport.edges)]
    out.append("[failures]")
    out += [f"{format_decimal(f.time)} : {f.agent} : {f.capability}" for f in s.failures]
    out.append("[resources]")
    out += [format_decimal(t) for t in s.resources]
    return "\n".join(out) + "\n"


def serialize_final_configuration(s: Scenario, config: Configuration, broken: dict) -> str:
    """Scenario-like rendering of a final configuration; broken capabilities as comments."""
    comments = ["final configuration"]
    comments += [f"broken {agent} : {', '.join(sorted(caps))}"
                 for agent, caps in sorted(broken.items()) if caps]
    return serialize_scenario(s.with_configuration(config), comments)


METRICS_HEADER = ("seed", "converged", "infeasible", "t_converge", "n_messages",
                  "n_role_changes", "locality_radius", "resources_done",
                  "resources_done_during_reconfig")


def metrics_row(m) -> list:
    return [
        m.seed,
        int(m.converged),
        int(m.infeasible),
        format_decimal(m.t_converge),
        m.n_messages,
        m.n_role_changes,
        -1 if m.locality_radius is None else m.locality_radius,
        m.resources_done,
        m.resources_done_during_reconfig,
    ]


def write_metrics_csv(rows, comments=()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    for m in rows:
        writer.writerow(metrics_row(m))
    return buf.getvalue()


def write_trajectory_csv(trajectory) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("time", "W", "D", "H"))
    for t, (w, d, h) in zip(trajectory.times, trajectory.counts):
        writer.writerow((repr(float(t)), int(w), int(d), int(h)))
    return buf.getvalue()
