"""Wave-like decentralized role reallocation.

A failing agent becomes the origin of a wave. The role it can no longer act
becomes the *token*: the wave probes other agents one at a time, nearest
first. A capable role holder tentatively adopts the token and hands its own
role on as the next token; an idle agent (or the origin itself, if it can
act the current token) closes the chain. The closed chain travels back as
TentativeAccept, the origin commits it, and a Commit relay installs the new
roles. Dead ends are undone by Rollback, which carries the visited set back
so the search never revisits an agent, which makes it a distributed
augmenting-path search.

With explicit transport the origin pins the holders of the steps next to
the reassigned ones before it commits. A pinned holder has checked the
transport edges to the new holders itself and keeps its role still until
the Commit arrives, so concurrent waves cannot break adjacency.

Concurrent waves are ordered by ``(WaveId, -attempt)``. A higher-priority
Propose preempts a tentative (not yet prepared) adoption of a lower wave;
the preempted wave aborts and its origin retries after a backoff.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .errors import ProtocolViolation
from .model import Agent, Role, TransportGraph, TransportMode, actable


class Variant(enum.Enum):
    PROPOSE = "Propose"
    TENTATIVE_ACCEPT = "TentativeAccept"
    ROLLBACK = "Rollback"
    COMMIT = "Commit"
    DONE = "Done"
    BUSY = "Busy"
    # Infeasibility is a local terminal decision of the origin; it is logged,
    # never put on the wire.
    INFEASIBLE = "Infeasible"


class Mode(enum.Enum):
    NORMAL = "Normal"
    IDLE = "Idle"
    DEFICIENT = "Deficient"
    TENTATIVE = "Tentative"
    HALTED = "Halted"


TERMINAL_MODES = frozenset({Mode.NORMAL, Mode.IDLE, Mode.HALTED})

DECLINE = "decline"
EXHAUSTED = "exhausted"
ABORT = "abort"
PIN = "pin"  # marks Propose/TentativeAccept/Rollback of the pinning round


@dataclass(frozen=True, order=True)
class WaveId:
    origin: str
    failure_seq: int

    def __str__(self):
        return f"{self.origin}#{self.failure_seq}"


@dataclass(frozen=True)
class ChainLink:
    agent: str
    vacated: Optional[Role]   # role given up; None for an idle agent
    adopted: Optional[int]    # step taken over; None when becoming idle

    @property
    def vacated_step(self) -> Optional[int]:
        return None if self.vacated is None else self.vacated.step

    def as_tuple(self):
        return (self.agent, self.vacated_step, self.adopted)


@dataclass(frozen=True)
class WaveMessage:
    variant: Variant
    wave: WaveId
    attempt: int = 0
    token: Optional[Role] = None
    chain: tuple = ()
    visited: frozenset = frozenset()
    hop_budget: int = 0
    origin_caps: frozenset = frozenset()
    origin_role: Optional[Role] = None
    reason: str = ""
    saw_busy: bool = False
    route: tuple = ()

    def __post_init__(self):
        agents = [link.agent for link in self.chain]
        if len(set(agents)) != len(agents):
            raise ProtocolViolation("chain agents must be distinct")

    @property
    def priority(self):
        return priority(self.wave, self.attempt)


def priority(wave: WaveId, attempt: int):
    """Smaller is more urgent; a newer attempt outranks an older one."""
    return (wave.origin, wave.failure_seq, -attempt)


@dataclass(frozen=True)
class ProtocolConfig:
    agent_ids: tuple
    transport: TransportGraph
    delay_per_hop: int
    probe_scope: str = "all"
    hop_budget: Optional[int] = None
    max_retries: int = 8
    # Extra willingness check on top of capability: (agent_id, token) -> bool.
    willing: Optional[Callable[[str, Role], bool]] = None

    @property
    def budget(self) -> int:
        return len(self.agent_ids) if self.hop_budget is None else self.hop_budget


def holders_after(chain) -> tuple:
    """Step holders around the chain before and after it is applied.

    Only steps touched by the chain and their flow neighbours are known from
    the role records the chain carries; that is all a commit needs.
    """
    before = {}
    for link in chain:
        if link.vacated is not None:
            r = link.vacated
            for p in r.predecessors:
                before.setdefault(r.step - 1, p)
            for s in r.successors:
                before.setdefault(r.step + 1, s)
    for link in chain:
        if link.vacated is not None:
            before[link.vacated.step] = link.agent
    after = dict(before)
    for link in chain:
        if link.vacated is not None and after.get(link.vacated.step) == link.agent:
            del after[link.vacated.step]
    for link in chain:
        if link.adopted is not None:
            after[link.adopted] = link.agent
    return before, after


def chain_changes(chain) -> dict:
    """Steps the chain reassigns, mapped to their new holders."""
    return {link.adopted: link.agent for link in chain if link.adopted is not None}


def required_for(chain, step: int) -> str:
    for link in chain:
        if link.vacated is not None and link.vacated.step == step:
            return link.vacated.required
    raise ProtocolViolation(f"step {step} is not carried by the chain")


@dataclass
class Search:
    wave: WaveId
    attempt: int
    token: Role
    chain: tuple
    visited: frozenset
    hop_budget: int
    origin_caps: frozenset
    origin_role: Role
    candidates: list
    probe: Optional[str] = None
    saw_busy: bool = False

    def matches(self, msg: WaveMessage) -> bool:
        return msg.wave == self.wave and msg.attempt == self.attempt


@dataclass
class Participation:
    wave: WaveId
    attempt: int
    parent: str
    incoming: WaveMessage
    adopted: Optional[int]
    search: Optional[Search] = None
    prepared: bool = False
    pinned: bool = False      # only holding still for a neighbour's commit

    def matches(self, msg: WaveMessage) -> bool:
        return msg.wave == self.wave and msg.attempt == self.attempt


@dataclass
class Pinning:
    """Origin side of the pinning round that precedes an explicit-mode commit."""
    chain: tuple
    steps: list               # neighbour steps still to pin, in order
    pinned: list = field(default_factory=list)

    @property
    def current(self) -> int:
        return self.steps[0]


@dataclass
class OwnWave:
    wave: WaveId
    attempt: int = 0
    search: Optional[Search] = None
    committing: bool = False
    pinning: Optional[Pinning] = None
    retry_count: int = 0
    timer_token: int = 0
    timer_pending: bool = False
    halted: bool = False


@dataclass(frozen=True)
class Snapshot:
    agent_id: str
    mode: Mode
    role: Optional[Role]
    broken: frozenset
    wave: Optional[WaveId]
    tentative_step: Optional[int]


class WaveAgent:
    """Protocol state machine of one agent.

    Handlers return outbound ``(to, WaveMessage)`` pairs. Retry timers the
    agent wants are queued in ``timers`` as ``(delay, wave, token)``; notable
    events (commits, infeasibility) are appended to ``log``.
    """

    def __init__(self, agent: Agent, role: Optional[Role], config: ProtocolConfig,
                 directory: Optional[dict] = None):
        self.agent = agent
        self.role = role
        self.cfg = config
        self.directory = dict(directory or {})
        self.own: Optional[OwnWave] = None
        self.part: Optional[Participation] = None
        self.failure_seq = 0
        self.timers: list = []
        self.log: list = []

    @property
    def id(self) -> str:
        return self.agent.id

    @property
    def mode(self) -> Mode:
        if self.part is not None:
            return Mode.TENTATIVE
        if self.own is not None:
            return Mode.HALTED if self.own.halted else Mode.DEFICIENT
        return Mode.IDLE if self.role is None else Mode.NORMAL

    @property
    def awaiting_reply(self) -> bool:
        search = self._active_search()
        return search is not None and search.probe is not None

    @property
    def can_work(self) -> bool:
        return self.mode in (Mode.NORMAL, Mode.IDLE)

    def snapshot(self) -> Snapshot:
        wave = None
        if self.part is not None:
            wave = self.part.wave
        elif self.own is not None:
            wave = self.own.wave
        return Snapshot(self.id, self.mode, self.role, self.agent.broken, wave,
                        None if self.part is None else self.part.adopted)

    def drain_timers(self) -> list:
        timers, self.timers = self.timers, []
        return timers

    def drain_log(self) -> list:
        log, self.log = self.log, []
        return log

    # ------------------------------------------------------------------ entry points

    def on_capability_failure(self, capability: str, now: int = 0) -> list:
        self.agent = self.agent.with_broken(capability)
        if self.part is not None or self.own is not None:
            # Re-examined once the current wave involvement settles.
            return []
        if self.role is None or self.role.required != capability:
            return []
        return self._start_wave()

    def receive(self, sender: str, msg, now: int = 0) -> list:
        if not isinstance(msg, WaveMessage):
            raise ProtocolViolation(f"unexpected payload {msg!r}")
        handler = {
            Variant.PROPOSE: self.handle_propose,
            Variant.TENTATIVE_ACCEPT: self.handle_tentative_accept,
            Variant.ROLLBACK: self.handle_rollback,
            Variant.BUSY: self.handle_rollback,
            Variant.COMMIT: self.handle_commit,
            Variant.DONE: self.handle_done,
        }.get(msg.variant)
        if handler is None:
            raise ProtocolViolation(f"{msg.variant} is never sent")
        return handler(sender, msg)

    __call__ = receive

    def on_retry_timer(self, wave: WaveId, token: int, now: int = 0) -> list:
        own = self.own
        if own is None or own.wave != wave or own.timer_token != token:
            return []
        own.timer_pending = False
        if own.halted or own.search is not None or own.committing or own.pinning \
                or self.part is not None:
            return []
        own.attempt += 1
        return self._begin_search()

    # ------------------------------------------------------------------ origin side

    def _start_wave(self) -> list:
        self.failure_seq += 1
        self.own = OwnWave(WaveId(self.id, self.failure_seq))
        self.log.append(("wave", self.own.wave))
        return self._begin_search()

    def _begin_search(self) -> list:
        own = self.own
        visited = frozenset([self.id])
        search = Search(
            wave=own.wave,
            attempt=own.attempt,
            token=self.role,
            chain=(),
            visited=visited,
            hop_budget=self.cfg.budget,
            origin_caps=self.agent.actable_capabilities,
            origin_role=self.role,
            candidates=self._candidates(self.role, visited),
        )
        own.search = search
        return self._probe_next(search)

    def _schedule_retry(self) -> list:
        own = self.own
        own.retry_count += 1
        if own.retry_count > self.cfg.max_retries:
            return self._halt()
        own.timer_token += 1
        own.timer_pending = True
        delay = self.cfg.delay_per_hop * 2 ** (own.retry_count - 1)
        self.timers.append((delay, own.wave, own.timer_token))
        return []

    def _halt(self) -> list:
        self.own.search = None
        self.own.halted = True
        self.log.append(("infeasible", self.own.wave))
        return []

    def _close(self, chain: tuple) -> list:
        """Commit a closed chain, pinning its flow neighbours first if needed."""
        own = self.own
        own.search = None
        if self.cfg.transport.mode is TransportMode.EXPLICIT:
            changed = chain_changes(chain)
            steps = sorted({n for s in changed for n in (s - 1, s + 1)
                            if n not in changed and n in self.directory})
            if steps:
                own.pinning = Pinning(chain, steps)
                return self._send_pin()
        return self._commit(chain)

    def _send_pin(self) -> list:
        own = self.own
        pinning = own.pinning
        step = pinning.current
        target = self.directory[step]
        msg = WaveMessage(Variant.PROPOSE, own.wave, own.attempt,
                          token=Role(step, ""), chain=pinning.chain,
                          hop_budget=self.cfg.budget, reason=PIN)
        if target == self.id:
            return self._handle_pin(msg)
        return [(target, msg)]

    def _pin_granted(self, sender: str, msg: WaveMessage) -> list:
        own = self.own
        if own is None or own.pinning is None or own.wave != msg.wave \
                or own.attempt != msg.attempt or msg.token.step != own.pinning.current:
            # we gave up on this round while the grant was in flight
            return [(sender, WaveMessage(Variant.ROLLBACK, msg.wave, msg.attempt, reason=ABORT))]
        pinning = own.pinning
        self._learn({msg.token.step: sender})
        pinning.pinned.append(sender)
        pinning.steps.pop(0)
        if pinning.steps:
            return self._send_pin()
        own.pinning = None
        return self._commit(pinning.chain, pinning.pinned)

    def _pin_refused(self) -> list:
        """A neighbour is busy or not adjacent: drop the chain and retry later."""
        own = self.own
        pinning, own.pinning = own.pinning, None
        abort = WaveMessage(Variant.ROLLBACK, own.wave, own.attempt, reason=ABORT)
        targets = [link.agent for link in pinning.chain if link.agent != self.id]
        targets += [a for a in pinning.pinned if a not in targets]
        return [(a, abort) for a in targets] + self._schedule_retry()

    def _handle_pin(self, msg: WaveMessage) -> list:
        """Hold our role still for another wave's commit, if the edges allow it."""
        origin = msg.wave.origin
        step = msg.token.step
        if self.role is None or self.role.step != step:
            holder = self.directory.get(step)
            if holder is None or holder in (self.id, origin) or msg.hop_budget <= 0:
                return [(origin, self._reply(msg, Variant.ROLLBACK, reason=PIN))]
            return [(holder, replace(msg, hop_budget=msg.hop_budget - 1))]
        out = []
        part, own = self.part, self.own
        if part is not None:
            if part.prepared or msg.priority >= priority(part.wave, part.attempt):
                return [(origin, self._reply(msg, Variant.BUSY))]
            out += self._abandon(part)
        elif own is not None and (own.search is not None or own.committing or own.pinning):
            if own.committing or msg.priority >= priority(own.wave, own.attempt):
                return out + [(origin, self._reply(msg, Variant.BUSY))]
            if own.pinning:
                out += self._pin_refused()  # yield, or two pinning origins starve each other
            own.search = None
        changed = chain_changes(msg.chain)
        transport = self.cfg.transport
        for a, b in ((step - 1, step), (step, step + 1)):
            src = self.id if a == step else changed.get(a)
            dst = self.id if b == step else changed.get(b)
            if src is not None and dst is not None and not transport.has_edge(src, dst):
                return out + [(origin, self._reply(msg, Variant.ROLLBACK, reason=PIN))] \
                    + self._settle()
        self.part = Participation(msg.wave, msg.attempt, origin, msg, step,
                                  prepared=True, pinned=True)
        return out + [(origin, replace(msg, variant=Variant.TENTATIVE_ACCEPT))]

    def _commit(self, chain: tuple, pinned=()) -> list:
        own = self.own
        own.search = None
        own.committing = True
        self._install(chain)
        self.log.append(("commit", own.wave, chain))
        members = {link.agent for link in chain}
        view = self._view(chain)
        rewire = list(pinned)
        for step in sorted(chain_changes(chain)):
            for neighbour in (step - 1, step + 1):
                holder = view.get(neighbour)
                if holder is not None and holder not in members and holder not in rewire:
                    rewire.append(holder)
        route = rewire + [link.agent for link in reversed(chain) if link.agent != self.id]
        msg = WaveMessage(Variant.COMMIT, own.wave, own.attempt, chain=chain, route=tuple(route[1:]))
        return [(route[0], msg)]

    # ------------------------------------------------------------------ handlers

    def handle_propose(self, sender: str, msg: WaveMessage) -> list:
        if msg.variant is not Variant.PROPOSE:
            raise ProtocolViolation("handle_propose needs a Propose")
        if msg.reason == PIN:
            return self._handle_pin(msg)
        if self.id in msg.visited or msg.hop_budget <= 0 or not self._willing(msg.token):
            return [(sender, self._reply(msg, Variant.ROLLBACK, reason=DECLINE))]

        out = []
        part, own = self.part, self.own
        if part is not None:
            if part.prepared or msg.priority >= priority(part.wave, part.attempt):
                return [(sender, self._reply(msg, Variant.BUSY))]
            out += self._abandon(part)
        elif own is not None and (own.search is not None or own.committing or own.pinning):
            if own.committing or own.pinning or msg.priority >= priority(own.wave, own.attempt):
                return [(sender, self._reply(msg, Variant.BUSY))]
            own.search = None  # our own attempt is dead; stale replies get ignored
        return out + self._engage(sender, msg)

    def handle_tentative_accept(self, sender: str, msg: WaveMessage) -> list:
        if msg.reason == PIN:
            return self._pin_granted(sender, msg)
        own, part = self.own, self.part
        if own is not None and own.search is not None and own.search.matches(msg) \
                and sender == own.search.probe:
            origin_link = msg.chain[-1]
            step = origin_link.adopted
            if step is not None and not actable(self.agent, required_for(msg.chain, step)):
                # Broke again while searching; the chain is useless to us.
                own.search = None
                return self._abort_all(msg) + self._schedule_retry()
            return self._close(msg.chain)
        if part is not None and part.search is not None and part.matches(msg) \
                and sender == part.search.probe:
            part.search = None
            part.prepared = True
            return [(part.parent, replace(msg))]
        return self._abort_all(msg)

    def handle_rollback(self, sender: str, msg: WaveMessage) -> list:
        if msg.variant is Variant.ROLLBACK and msg.reason == ABORT:
            return self._on_abort(msg)
        own = self.own
        if own is not None and own.pinning is not None \
                and own.wave == msg.wave and own.attempt == msg.attempt:
            return self._pin_refused()
        search = self._active_search()
        if search is None or not search.matches(msg) or sender != search.probe:
            return []
        search.probe = None
        search.visited = search.visited | msg.visited
        if msg.variant is Variant.BUSY or msg.saw_busy:
            search.saw_busy = True
        return self._probe_next(search)

    def handle_commit(self, sender: str, msg: WaveMessage) -> list:
        members = {link.agent for link in msg.chain}
        out = []
        if self.id in members:
            part = self.part
            if part is None or not part.matches(msg) or not part.prepared:
                raise ProtocolViolation(f"{self.id} got Commit for {msg.wave} without being prepared")
            self._install(msg.chain)
            self.part = None
        else:
            self._rewire(msg.chain)
            part = self.part
            if part is not None and part.pinned and part.matches(msg):
                self.part = None
                members.add(self.id)  # settle below like a chain member
        if msg.route:
            out.append((msg.route[0], replace(msg, route=msg.route[1:])))
        else:
            out.append((msg.wave.origin, WaveMessage(Variant.DONE, msg.wave, msg.attempt)))
        if self.id in members:
            out += self._settle()
        return out

    def handle_done(self, sender: str, msg: WaveMessage) -> list:
        own = self.own
        if own is None or not own.committing or own.wave != msg.wave or own.attempt != msg.attempt:
            return []
        self.own = None
        self.log.append(("done", msg.wave))
        return self._settle()

    # ------------------------------------------------------------------ internals

    def _reply(self, msg: WaveMessage, variant: Variant, **kw) -> WaveMessage:
        return WaveMessage(variant, msg.wave, msg.attempt, visited=msg.visited, **kw)

    def _willing(self, token: Role) -> bool:
        if not actable(self.agent, token.required):
            return False
        return self.cfg.willing is None or self.cfg.willing(self.id, token)

    def _active_search(self) -> Optional[Search]:
        if self.part is not None:
            return self.part.search
        if self.own is not None:
            return self.own.search
        return None

    def _candidates(self, token: Role, visited) -> list:
        if self.cfg.probe_scope == "flow":
            pool = set(token.predecessors) | set(token.successors)
        else:
            pool = set(self.cfg.agent_ids)
        ranked = []
        for other in pool:
            if other == self.id or other in visited:
                continue
            hops = self.cfg.transport.hops(self.id, other)
            if hops is not None:
                ranked.append((hops, other))
        return [other for _, other in sorted(ranked)]

    def _probe_next(self, search: Search) -> list:
        while search.candidates:
            candidate = search.candidates.pop(0)
            if candidate in search.visited:
                continue
            search.probe = candidate
            return [(candidate, WaveMessage(
                Variant.PROPOSE, search.wave, search.attempt,
                token=search.token, chain=search.chain, visited=search.visited,
                hop_budget=search.hop_budget, origin_caps=search.origin_caps,
                origin_role=search.origin_role))]
        search.probe = None
        if self.own is not None and self.own.search is search:
            self.own.search = None
            return self._schedule_retry() if search.saw_busy else self._halt()
        part = self.part
        self.part = None
        reply = WaveMessage(Variant.ROLLBACK, search.wave, search.attempt,
                            visited=search.visited, reason=EXHAUSTED, saw_busy=search.saw_busy)
        return [(part.parent, reply)] + self._settle()

    def _engage(self, sender: str, msg: WaveMessage) -> list:
        token = msg.token
        origin = msg.wave.origin
        if self.role is None:
            chain = msg.chain + (ChainLink(self.id, None, token.step),
                                 ChainLink(origin, msg.origin_role, None))
            if not self._transport_ok(chain):
                return [(sender, self._reply(msg, Variant.ROLLBACK, reason=DECLINE))]
            self.part = Participation(msg.wave, msg.attempt, sender, msg, token.step, prepared=True)
            return [(sender, replace(msg, variant=Variant.TENTATIVE_ACCEPT, chain=chain))]

        handed_on = self.role
        chain = msg.chain + (ChainLink(self.id, handed_on, token.step),)
        if handed_on.required in msg.origin_caps:
            closed = chain + (ChainLink(origin, msg.origin_role, handed_on.step),)
            if self._transport_ok(closed):
                self.part = Participation(msg.wave, msg.attempt, sender, msg, token.step, prepared=True)
                return [(sender, replace(msg, variant=Variant.TENTATIVE_ACCEPT, chain=closed))]
        visited = msg.visited | {self.id}
        search = Search(
            wave=msg.wave, attempt=msg.attempt, token=handed_on, chain=chain,
            visited=visited, hop_budget=msg.hop_budget - 1,
            origin_caps=msg.origin_caps, origin_role=msg.origin_role,
            candidates=self._candidates(handed_on, visited),
        )
        self.part = Participation(msg.wave, msg.attempt, sender, msg, token.step, search=search)
        return self._probe_next(search)

    def _transport_ok(self, chain) -> bool:
        transport = self.cfg.transport
        if transport.mode is TransportMode.FULL:
            return True
        after = self._view(chain)
        for step in chain_changes(chain):
            for a, b in ((step - 1, step), (step, step + 1)):
                if a in after and b in after and not transport.has_edge(after[a], after[b]):
                    return False
        return True

    def _abandon(self, part: Participation) -> list:
        """Drop a lower-priority tentative adoption and tell everyone upstream."""
        self.part = None
        targets = []
        for agent in [link.agent for link in part.incoming.chain] + [part.wave.origin]:
            if agent != self.id and agent not in targets:
                targets.append(agent)
        abort = WaveMessage(Variant.ROLLBACK, part.wave, part.attempt, reason=ABORT)
        return [(agent, abort) for agent in targets]

    def _abort_all(self, msg: WaveMessage) -> list:
        abort = WaveMessage(Variant.ROLLBACK, msg.wave, msg.attempt, reason=ABORT)
        seen = set()
        out = []
        for link in msg.chain:
            if link.agent != self.id and link.agent not in seen:
                seen.add(link.agent)
                out.append((link.agent, abort))
        return out

    def _on_abort(self, msg: WaveMessage) -> list:
        part, own = self.part, self.own
        if part is not None and part.matches(msg):
            self.part = None
            return self._settle()
        if own is not None and own.search is not None and own.search.matches(msg):
            own.search = None
            return self._schedule_retry()
        if own is not None and own.pinning is not None \
                and own.wave == msg.wave and own.attempt == msg.attempt:
            return self._pin_refused()
        return []

    def _install(self, chain: tuple) -> None:
        self._learn(chain_changes(chain))
        after = self._view(chain)
        link = next(link for link in chain if link.agent == self.id)
        if link.adopted is None:
            self.role = None
        else:
            step = link.adopted
            self.role = Role(
                step=step,
                required=required_for(chain, step),
                predecessors=frozenset([after[step - 1]]) if step - 1 in after else frozenset(),
                successors=frozenset([after[step + 1]]) if step + 1 in after else frozenset(),
            )

    def _rewire(self, chain: tuple) -> None:
        after = chain_changes(chain)
        role = self.role
        if role is not None:
            preds, succs = role.predecessors, role.successors
            if role.step - 1 in after:
                preds = frozenset([after[role.step - 1]])
            if role.step + 1 in after:
                succs = frozenset([after[role.step + 1]])
            self.role = replace(role, predecessors=preds, successors=succs)
        self._learn(after)

    def _view(self, chain) -> dict:
        """Best known step holders once ``chain`` is applied.

        The role records in the chain were captured when each member joined
        and may be outdated, so they only fill steps the directory lacks.
        """
        _, context = holders_after(chain)
        return {**context, **self.directory, **chain_changes(chain)}

    def _learn(self, after: dict) -> None:
        self.directory.update(after)

    def _settle(self) -> list:
        """Re-examine our own role once no wave involvement is pending."""
        if self.part is not None:
            return []
        own = self.own
        broken = self.role is not None and self.role.required in self.agent.broken
        if not broken:
            if own is not None and not own.committing and not own.pinning:
                self.log.append(("resolved", own.wave))
                self.own = None
            return []
        if own is None:
            return self._start_wave()
        if own.halted or own.search is not None or own.committing or own.pinning \
                or own.timer_pending:
            return []
        return self._schedule_retry()


def is_quiescent(pending_deliveries: int, agents) -> bool:
    """Global observer check; agents themselves never call this."""
    if pending_deliveries:
        return False
    return all(agent.mode in TERMINAL_MODES for agent in agents)
