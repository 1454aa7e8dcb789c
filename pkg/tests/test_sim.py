import pytest
from hypothesis import given, settings, strategies as st

from wavereconf.errors import RoutingError
from wavereconf.generate import GeneratorParams, scenario_for_seed
from wavereconf.model import Configuration, Task, TransportGraph, validate_configuration
from wavereconf.protocol import Mode
from wavereconf.scenario_io import (AgentSpec, FailureSpec, Params, Scenario,
                                    write_metrics_csv)
from wavereconf.sim import (ResourceState, Simulation, compute_locality, failure_free_twin,
                            non_interference_violations, run)
from wavereconf.timebase import TICKS


def line(resources=(), failures=(), proc=5, delay=1, t_max=10**6):
    return Scenario(
        task=Task(("c1", "c2", "c3")),
        agents=(AgentSpec("a1", {"c1"}, 0), AgentSpec("a2", {"c2"}, 1), AgentSpec("a3", {"c3"}, 2)),
        params=Params(delay_per_hop=delay * TICKS, proc_time=proc * TICKS, t_max=t_max * TICKS),
        failures=failures,
        resources=tuple(t * TICKS for t in resources),
    )


def test_failure_free_line_schedule():
    result = run(line(resources=(0, 5)))
    m = result.metrics
    assert m.converged and not m.infeasible and m.n_messages == 0
    assert m.resources_done == 2 and m.n_role_changes == 0 and m.locality_radius is None
    # arrival + 3 * proc_time + 2 * handover
    assert result.completions == {"r0": 17 * TICKS, "r1": 22 * TICKS}


def test_empty_world():
    m = run(line()).metrics
    assert m.converged and m.t_quiescent == 0
    assert (m.n_messages, m.n_role_changes, m.resources_done, m.resources_done_during_reconfig) == (0, 0, 0, 0)


def test_resource_step_starts_processing():
    sim = Simulation(line())
    r = ResourceState("r0", 0)
    r.location = "a1"
    (ev,) = sim.resource_step("a1", r)
    assert ev.time == 5 * TICKS and ev.kind == "complete"
    wrong = ResourceState("r1", 0)
    wrong.location = "a2"
    with pytest.raises(RoutingError):
        sim.resource_step("a2", wrong)


def test_w1_metrics(w1):
    result = run(w1)
    m = result.metrics
    assert (m.n_role_changes, m.locality_radius, m.n_messages) == (2, 1, 5)
    assert result.chain_agents == {"a1", "a2"}
    assert m.converged and m.resources_done == 5


def test_w2_locality_and_buffering(w2):
    result = run(w2)
    assert result.metrics.locality_radius == 2 and result.metrics.n_role_changes == 3
    t_fail = w2.failures[0].time
    t_commit = next(t for t, _, to, variant, _ in result.trace
                    if variant == "TentativeAccept" and to == "a1")
    for visits in result.visits.values():
        for agent, start, _ in visits:
            # the deficient origin buffers instead of working until it commits
            assert not (agent == "a1" and t_fail <= start < t_commit)
    late_step0 = {v[0] for visits in result.visits.values() for v in visits[:1] if v[1] > t_commit}
    assert late_step0 <= {"a2"}
    assert result.metrics.resources_done == len(w2.resources)


def test_w4_infeasible_metrics(w4):
    m = run(w4).metrics
    assert m.infeasible and not m.converged and m.locality_radius is None


def test_compute_locality_examples():
    task = Task(("c1", "c2", "c3"))
    pre = Configuration.from_assignment({0: "a1", 1: "a2", 2: "a3"}, task)
    swap = Configuration.from_assignment({0: "a2", 1: "a1", 2: "a3"}, task)
    assert compute_locality(pre, swap, "a1", TransportGraph.full()) == 1
    rot = Configuration.from_assignment({0: "a2", 1: "a3", 2: "a1"}, task)
    assert compute_locality(pre, rot, "a1", TransportGraph.full()) == 2
    assert compute_locality(pre, pre, "a1", TransportGraph.full()) is None


def test_t_max_reports_non_termination(w2):
    from dataclasses import replace
    short = replace(w2, params=replace(w2.params, t_max=11 * TICKS))
    m = run(short).metrics
    assert m.non_termination and not m.converged and not m.infeasible


def test_non_interference_on_named_scenarios(w1, w2):
    assert non_interference_violations(w1) == []
    assert non_interference_violations(w2) == []
    assert failure_free_twin(w1).failures == ()


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 8), failures=st.integers(1, 2))
def test_run_invariants(seed, n, failures):
    s = scenario_for_seed(seed, n, failures)
    a, b = run(s), run(s)
    assert write_metrics_csv([a.metrics]) == write_metrics_csv([b.metrics])
    assert a.configuration == b.configuration
    m = a.metrics
    assert not m.non_termination
    assert m.n_role_changes <= n
    assert (m.locality_radius is None) == (m.n_role_changes == 0)
    assert m.resources_done <= len(s.resources)
    assert all(snap.mode in (Mode.NORMAL, Mode.IDLE, Mode.HALTED) for snap in a.snapshots.values())
    if m.converged:
        agents = s.agent_map(s.broken_after_failures())
        assert validate_configuration(a.configuration, s.task, agents, s.transport).valid


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 8))
def test_explicit_transport_commits_are_valid(seed, n):
    s = scenario_for_seed(seed, n, 1, GeneratorParams(explicit=True))
    result = run(s)
    if result.metrics.converged:
        agents = s.agent_map(s.broken_after_failures())
        assert validate_configuration(result.configuration, s.task, agents, s.transport).valid


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(3, 9), f=st.integers(2, 3))
def test_concurrent_explicit_waves_keep_adjacency(seed, n, f):
    # the only violations left may sit at steps whose origin halted
    s = scenario_for_seed(seed, n, f, GeneratorParams(explicit=True))
    result = run(s)
    assert not result.metrics.non_termination
    agents = s.agent_map(s.broken_after_failures())
    report = validate_configuration(result.configuration, s.task, agents, s.transport)
    halted = {result.configuration.step_of(a) for a, snap in result.snapshots.items()
              if snap.mode is Mode.HALTED}
    assert all(v.step in halted for v in report.violations)
