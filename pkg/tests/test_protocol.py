import pytest

from wavereconf.errors import ProtocolViolation
from wavereconf.model import Agent, Configuration, Role, Task, TransportGraph
from wavereconf.protocol import (ABORT, DECLINE, EXHAUSTED, PIN, ChainLink, Mode, ProtocolConfig,
                                 Variant, WaveAgent, WaveId, WaveMessage, chain_changes,
                                 is_quiescent, priority)
from wavereconf.sim import Simulation


def make_agents(caps: dict, assignment: dict, task: Task, max_retries=8, transport=None):
    transport = TransportGraph.full() if transport is None else transport
    cfg = ProtocolConfig(tuple(sorted(caps)), transport, 1, max_retries=max_retries)
    conf = Configuration.from_assignment(assignment, task)
    return {a: WaveAgent(Agent(a, frozenset(c)), conf.role_of(a), cfg, dict(conf.assignment))
            for a, c in caps.items()}


def pump(agents, sender, out, limit=100):
    """Deliver outbound messages breadth-first; returns the delivered (from, to, variant) list."""
    queue = [(sender, to, msg) for to, msg in out]
    seen = []
    while queue and len(seen) < limit:
        frm, to, msg = queue.pop(0)
        seen.append((frm, to, msg.variant))
        queue += [(to, nxt, m) for nxt, m in agents[to].receive(frm, msg)]
    return seen


W1_TASK = Task(("c1", "c2", "c3"))


@pytest.fixture
def w1_agents():
    return make_agents({"a1": {"c1", "c2"}, "a2": {"c1", "c2"}, "a3": {"c3"}},
                       {0: "a1", 1: "a2", 2: "a3"}, W1_TASK)


def test_w1_direct_swap_trace(w1_agents):
    ag = w1_agents
    out = ag["a1"].on_capability_failure("c1")
    assert [(to, m.variant) for to, m in out] == [("a2", Variant.PROPOSE)]
    assert out[0][1].token.step == 0
    trace = pump(ag, "a1", out)
    assert trace == [
        ("a1", "a2", Variant.PROPOSE),
        ("a2", "a1", Variant.TENTATIVE_ACCEPT),
        ("a1", "a3", Variant.COMMIT),
        ("a3", "a2", Variant.COMMIT),
        ("a2", "a1", Variant.DONE),
    ]
    assert ag["a1"].role.step == 1 and ag["a2"].role.step == 0
    assert ag["a3"].role.predecessors == frozenset({"a1"})
    assert all(a.mode is Mode.NORMAL for a in ag.values())
    assert is_quiescent(0, ag.values())


def test_failure_of_unused_capability_is_ignored(w1_agents):
    assert w1_agents["a1"].on_capability_failure("c2") == []
    assert w1_agents["a1"].mode is Mode.NORMAL


def probe(wave=WaveId("a1", 1), attempt=0, step=0, required="c1", visited=("a1",),
          origin_caps=frozenset({"c2"}), chain=()):
    role = Role(step, required)
    return WaveMessage(Variant.PROPOSE, wave, attempt, token=role, chain=chain,
                       visited=frozenset(visited), hop_budget=5, origin_caps=origin_caps,
                       origin_role=Role(0, "c1"))


def test_incapable_or_visited_agent_declines(w1_agents):
    out = w1_agents["a3"].receive("a1", probe())
    assert out[0][0] == "a1" and out[0][1].variant is Variant.ROLLBACK
    assert out[0][1].reason == DECLINE
    out = w1_agents["a2"].receive("a1", probe(visited=("a1", "a2")))
    assert out[0][1].reason == DECLINE
    assert w1_agents["a2"].mode is Mode.NORMAL


def test_prepared_agent_answers_busy(w1_agents):
    a2 = w1_agents["a2"]
    a2.receive("a1", probe())
    assert a2.mode is Mode.TENTATIVE and a2.part.prepared
    out = a2.receive("a0", probe(wave=WaveId("a0", 1)))
    assert [m.variant for _, m in out] == [Variant.BUSY]


def chain_world():
    # a2 and a3 both hold roles that need forwarding, so they stay searching (unprepared)
    task = Task(("c1", "c2", "c3", "c4"))
    return make_agents({"a1": {"c1"}, "a2": {"c1", "c2"}, "a3": {"c2", "c3"}, "a4": {"c4"},
                        "a0": {"c9"}}, {0: "a1", 1: "a2", 2: "a3", 3: "a4"}, task)


def test_lower_priority_propose_gets_busy():
    ag = chain_world()
    ag["a2"].receive("a1", probe(origin_caps=frozenset()))
    assert ag["a2"].mode is Mode.TENTATIVE and not ag["a2"].part.prepared
    out = ag["a2"].receive("a9", probe(wave=WaveId("a9", 1), origin_caps=frozenset()))
    assert [m.variant for _, m in out] == [Variant.BUSY]


def test_higher_priority_propose_preempts_tentative_adoption():
    ag = chain_world()
    low = WaveId("a4", 1)
    ag["a2"].receive("a4", probe(wave=low, visited=("a4",), origin_caps=frozenset()))
    assert ag["a2"].part.wave == low
    out = ag["a2"].receive("a1", probe(origin_caps=frozenset()))
    aborts = [(to, m) for to, m in out if m.variant is Variant.ROLLBACK and m.reason == ABORT]
    assert [to for to, _ in aborts] == ["a4"] and aborts[0][1].wave == low
    assert ag["a2"].part.wave == WaveId("a1", 1)
    assert priority(WaveId("a1", 1), 0) < priority(low, 0)
    assert priority(low, 1) < priority(low, 0)


def test_stale_tentative_accept_aborts_the_chain(w1_agents):
    a1 = w1_agents["a1"]
    a1.on_capability_failure("c1")
    stale = WaveMessage(Variant.TENTATIVE_ACCEPT, WaveId("a1", 1), attempt=7,
                        chain=(ChainLink("a2", Role(1, "c2"), 0), ChainLink("a1", Role(0, "c1"), 1)))
    out = a1.receive("a2", stale)
    assert [(to, m.reason) for to, m in out] == [("a2", ABORT)]
    assert a1.role.step == 0  # nothing installed


def test_exhaustion_without_contention_halts():
    task = Task(("c1", "c2"))
    ag = make_agents({"a1": {"c1"}, "a2": {"c2"}}, {0: "a1", 1: "a2"}, task)
    trace = pump(ag, "a1", ag["a1"].on_capability_failure("c1"))
    assert trace == [("a1", "a2", Variant.PROPOSE), ("a2", "a1", Variant.ROLLBACK)]
    assert ag["a1"].mode is Mode.HALTED
    assert ("infeasible", WaveId("a1", 1)) in ag["a1"].drain_log()


def test_busy_exhaustion_retries_with_backoff_then_halts():
    task = Task(("c1", "c2"))
    ag = make_agents({"a1": {"c1"}, "a2": {"c1", "c2"}}, {0: "a1", 1: "a2"}, task, max_retries=3)
    a1 = ag["a1"]
    out = a1.on_capability_failure("c1")
    delays = []
    for attempt in range(4):
        (to, msg), = out
        assert msg.variant is Variant.PROPOSE and msg.attempt == attempt
        busy = WaveMessage(Variant.BUSY, msg.wave, msg.attempt, visited=msg.visited)
        assert a1.receive("a2", busy) == []
        timers = a1.drain_timers()
        if not timers:
            break
        (delay, wave, token), = timers
        delays.append(delay)
        assert a1.on_retry_timer(wave, token - 1) == []  # superseded timer
        out = a1.on_retry_timer(wave, token)
    assert delays == [1, 2, 4]
    assert a1.mode is Mode.HALTED


def test_participant_exhaustion_reports_back():
    ag = chain_world()
    a2 = ag["a2"]
    (to, fwd), = a2.receive("a1", probe(visited=("a1", "a0", "a4"), origin_caps=frozenset()))
    assert to == "a3" and fwd.token == a2.role
    decline = WaveMessage(Variant.ROLLBACK, fwd.wave, fwd.attempt, visited=fwd.visited | {"a3"},
                          reason=DECLINE)
    out = a2.receive("a3", decline)
    assert [(to, m.variant, m.reason) for to, m in out] == [("a1", Variant.ROLLBACK, EXHAUSTED)]
    assert "a3" in out[0][1].visited and a2.mode is Mode.NORMAL


def pin_world(edges):
    # a1 loses c1; idle a4 can take step 0, and a2 next to it must stay put
    return make_agents({"a1": {"c1"}, "a2": {"c2"}, "a3": {"c3"}, "a4": {"c1"}},
                       {0: "a1", 1: "a2", 2: "a3"}, W1_TASK,
                       transport=TransportGraph.explicit(edges))


def test_explicit_commit_pins_the_flow_neighbour_first():
    ag = pin_world({("a1", "a2"), ("a2", "a3"), ("a4", "a2")})
    out = ag["a1"].on_capability_failure("c1")
    trace = pump(ag, "a1", out)
    pins = [(f, t) for f, t, v in trace if v is Variant.PROPOSE and t == "a2"]
    assert ("a1", "a2") in pins
    assert trace[-1][2] is Variant.DONE
    assert ag["a4"].role.step == 0 and ag["a4"].role.successors == frozenset({"a2"})
    assert ag["a2"].role.predecessors == frozenset({"a4"})
    assert all(a.mode in (Mode.NORMAL, Mode.IDLE) for a in ag.values())


def test_pinned_neighbour_refuses_a_missing_edge():
    ag = pin_world({("a1", "a2"), ("a2", "a3"), ("a2", "a4"), ("a4", "a1")})
    chain = (ChainLink("a1", Role(0, "c1"), None), ChainLink("a4", None, 0))
    pin = WaveMessage(Variant.PROPOSE, WaveId("a1", 1), 0, token=Role(1, ""),
                      chain=chain, hop_budget=4, reason=PIN)
    # a4 -> a2 is missing, so the neighbour vetoes instead of holding still
    out = ag["a2"].receive("a1", pin)
    assert [(to, m.variant, m.reason) for to, m in out] == [("a1", Variant.ROLLBACK, PIN)]
    assert ag["a2"].mode is Mode.NORMAL


def test_pin_grant_after_the_origin_gave_up_is_aborted():
    ag = pin_world({("a1", "a2"), ("a2", "a3"), ("a4", "a2")})
    ag["a1"].on_capability_failure("c1")
    grant = WaveMessage(Variant.TENTATIVE_ACCEPT, WaveId("a1", 1), 7,
                        token=Role(1, ""), reason=PIN)
    out = ag["a1"].receive("a2", grant)
    assert [(to, m.variant, m.reason) for to, m in out] == [("a2", Variant.ROLLBACK, ABORT)]


def test_wire_contract():
    a = make_agents({"a1": {"c1"}}, {0: "a1"}, Task(("c1",)))["a1"]
    with pytest.raises(ProtocolViolation):
        a.receive("a2", WaveMessage(Variant.INFEASIBLE, WaveId("a2", 1)))
    with pytest.raises(ProtocolViolation):
        a.receive("a2", "not a wave message")
    with pytest.raises(ProtocolViolation):
        WaveMessage(Variant.COMMIT, WaveId("a2", 1),
                    chain=(ChainLink("a1", None, 0), ChainLink("a1", None, 1)))


def test_chain_changes():
    chain = (ChainLink("a2", Role(1, "c2"), 0), ChainLink("a1", Role(0, "c1"), 1))
    assert chain_changes(chain) == {0: "a2", 1: "a1"}


# ---------------------------------------------------------------- named scenarios end to end

def variants(result):
    return [v for _, _, _, v, _ in result.trace]


def test_w1_messages(w1):
    result = Simulation(w1).run()
    assert variants(result) == ["Propose", "TentativeAccept", "Commit", "Commit", "Done"]
    assert [link.as_tuple() for link in result.chains[0][1]] == [("a2", 1, 0), ("a1", 0, 1)]


def test_w2_transitive_chain(w2):
    result = Simulation(w2).run()
    assert result.configuration.assignment == {0: "a2", 1: "a3", 2: "a1"}
    assert len(result.chains[0][1]) == 3
    assert result.metrics.n_messages == 7


def test_w3_backtracks_then_commits(w3):
    result = Simulation(w3).run()
    names = variants(result)
    assert names.count("Rollback") >= 2
    assert result.metrics.converged
    assert result.configuration.assignment == {0: "a4", 1: "a2", 2: "a3", 3: "a1"}


def test_w4_halts_without_changes(w4):
    result = Simulation(w4).run()
    assert variants(result) == ["Propose", "Rollback"]
    assert result.snapshots["a1"].mode is Mode.HALTED
    assert result.configuration == result.initial
