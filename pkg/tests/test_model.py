import pytest
from hypothesis import given, strategies as st

from wavereconf.errors import BrokenChain, UnknownAgent, UnknownCapability
from wavereconf.model import (Agent, Configuration, Role, Task, TransportGraph,
                              actable, apply_chain, validate_configuration)

TASK = Task(("c1", "c2", "c3"))


def world(**caps):
    return {a: Agent(a, frozenset(c)) for a, c in caps.items()}


def test_actable_respects_broken_capabilities():
    a = Agent("a1", {"c1", "c2"}).with_broken("c1")
    assert not actable(a, "c1")
    assert actable(a, "c2")
    assert not actable(a, "c9")
    with pytest.raises(UnknownCapability):
        actable(a, "c9", universe={"c1", "c2"})
    with pytest.raises(UnknownCapability):
        a.with_broken("c9")


def test_broken_must_be_held():
    with pytest.raises(ValueError):
        Agent("a1", {"c1"}, broken={"c2"})


def test_role_assignment_ignores_wiring():
    assert Role(1, "c2", frozenset({"a"}), frozenset()).assignment == \
        Role(1, "c2", frozenset({"b"}), frozenset({"c"})).assignment


def test_from_assignment_wires_the_step_chain():
    cfg = Configuration.from_assignment({0: "a1", 1: "a2", 2: "a3"}, TASK)
    assert cfg.wiring[1] == Role(1, "c2", frozenset({"a1"}), frozenset({"a3"}))
    assert cfg.wiring[0].predecessors == frozenset()
    assert cfg.step_of("a3") == 2 and cfg.step_of("a9") is None
    assert cfg.role_of("a9") is None


def test_validate_reports_each_clause():
    agents = world(a1={"c1"}, a2={"c2"}, a3={"c3"})
    good = Configuration.from_assignment({0: "a1", 1: "a2", 2: "a3"}, TASK)
    assert validate_configuration(good, TASK, agents, TransportGraph.full()).valid

    missing = Configuration.from_assignment({0: "a1", 1: "a2"}, TASK)
    clauses = {v.clause for v in validate_configuration(missing, TASK, agents,
                                                        TransportGraph.full()).violations}
    assert "a" in clauses

    broken = dict(agents, a1=agents["a1"].with_broken("c1"))
    report = validate_configuration(good, TASK, broken, TransportGraph.full())
    assert [(v.clause, v.step) for v in report.violations] == [("b", 0)]

    bad_wiring = Configuration(good.assignment, {**good.wiring, 1: Role(1, "c2")})
    report = validate_configuration(bad_wiring, TASK, agents, TransportGraph.full())
    assert [(v.clause, v.step) for v in report.violations] == [("c", 1)]

    sparse = TransportGraph.explicit({("a1", "a2")})
    report = validate_configuration(good, TASK, agents, sparse)
    assert [(v.clause, v.step) for v in report.violations] == [("d", 1)]


def test_validate_unknown_agent():
    cfg = Configuration.from_assignment({0: "zz"}, Task(("c1",)))
    with pytest.raises(UnknownAgent):
        validate_configuration(cfg, Task(("c1",)), {}, TransportGraph.full())


def test_apply_chain_swap_and_idle_handover():
    cfg = Configuration.from_assignment({0: "a1", 1: "a2", 2: "a3"}, TASK)
    swapped = apply_chain(cfg, [("a1", 1), ("a2", 0)], TASK)
    assert swapped.assignment == {0: "a2", 1: "a1", 2: "a3"}
    handed = apply_chain(cfg, [("a4", 0), ("a1", None)], TASK)
    assert handed.assignment == {0: "a4", 1: "a2", 2: "a3"}
    assert apply_chain(cfg, [], TASK) is cfg


@pytest.mark.parametrize("chain", [
    [("a1", 1), ("a1", 0)],        # duplicate agent
    [("a1", 1)],                   # step 1 now claimed twice
    [("a1", None)],                # step 0 left empty
    [("a1", 5), ("a4", 0)],        # outside the task
])
def test_apply_chain_rejects_broken_chains(chain):
    cfg = Configuration.from_assignment({0: "a1", 1: "a2", 2: "a3"}, TASK)
    with pytest.raises(BrokenChain):
        apply_chain(cfg, chain, TASK)


def test_transport_hops():
    g = TransportGraph.explicit({("a", "b"), ("b", "c")})
    assert g.hops("a", "c") == 2 and g.hops("c", "a") == 2
    assert g.hops("a", "z") is None
    assert g.has_edge("a", "b") and not g.has_edge("b", "a")
    assert g.connected(["a", "b", "c"]) and not g.connected(["a", "z"])
    full = TransportGraph.full()
    assert full.hops("x", "y") == 1 and full.hops("x", "x") == 0


@st.composite
def config_and_permutation(draw):
    k = draw(st.integers(1, 6))
    n_idle = draw(st.integers(0, 3))
    task = Task(tuple(f"c{i}" for i in range(k)))
    agents = [f"a{i}" for i in range(k + n_idle)]
    holders = draw(st.permutations(agents))
    cfg = Configuration.from_assignment(dict(enumerate(holders[:k])), task)
    movers = draw(st.lists(st.sampled_from(agents), unique=True, min_size=1))
    # rotate the movers' positions (step or idle) among themselves
    positions = [cfg.step_of(a) for a in movers]
    shift = draw(st.integers(0, len(movers) - 1))
    new = positions[shift:] + positions[:shift]
    return task, cfg, list(zip(movers, new))


@given(config_and_permutation())
def test_apply_chain_keeps_a_valid_bijection(case):
    task, cfg, chain = case
    out = apply_chain(cfg, chain, task)
    assert set(out.assignment) == set(cfg.assignment)
    assert len(set(out.assignment.values())) == len(out.assignment)
    everyone = {a: Agent(a, frozenset(task.steps)) for a in
                set(cfg.assignment.values()) | {a for a, _ in chain}}
    assert validate_configuration(out, task, everyone, TransportGraph.full()).valid
    untouched = {a for a in cfg.assignment.values()} - {a for a, _ in chain}
    for a in untouched:
        assert out.step_of(a) == cfg.step_of(a)
