"""Coordination media and endpoints.

The medium moves envelopes between endpoints with a deterministic latency of
``hops * delay_per_hop``. Endpoints hand delivered envelopes to the protocol
handler bound to their agent; the agent's task logic never sees wave
messages directly.
"""
from __future__ import annotations

import heapq
import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import AlreadyAttached, ProtocolViolation, UnknownEndpoint
from .model import TransportGraph


@dataclass(frozen=True)
class Envelope:
    sender: str
    to: str
    sent_at: int
    payload: object

    def __post_init__(self):
        if self.sender == self.to:
            raise ProtocolViolation(f"{self.sender} cannot send to itself")


@dataclass(frozen=True, order=True)
class Delivery:
    deliver_at: int
    seq: int
    envelope: Envelope = field(compare=False)


Handler = Callable[[str, object, int], list]


class CoordinationEndpoint:
    def __init__(self, agent_id: str, handler: Optional[Handler] = None):
        self.agent_id = agent_id
        self.inbox: deque = deque()
        self.handler = handler

    def bind(self, handler: Handler) -> None:
        self.handler = handler

    def effectuate(self, envelope: Envelope, now: Optional[int] = None) -> list:
        """Run the bound protocol handler; returns outbound ``(to, message)`` pairs."""
        if envelope.to != self.agent_id:
            raise ProtocolViolation(
                f"envelope for {envelope.to} delivered to endpoint {self.agent_id}"
            )
        if self.handler is None:
            raise ProtocolViolation(f"endpoint {self.agent_id} has no handler")
        return list(self.handler(envelope.sender, envelope.payload,
                                 envelope.sent_at if now is None else now))

    def drain(self, now: int) -> list:
        """Effectuate every envelope waiting in the inbox, in FIFO order."""
        results = []
        while self.inbox:
            envelope = self.inbox.popleft()
            results.append((envelope, self.effectuate(envelope, now)))
        return results


class CoordinationMedium:
    """Reliable point-to-point medium ordered by ``(deliver_at, seq)``."""

    def __init__(self, transport: TransportGraph, delay_per_hop: int, seq=None):
        if delay_per_hop <= 0:
            raise ValueError("delay_per_hop must be positive")
        self.transport = transport
        self.delay_per_hop = delay_per_hop
        self.pending: list = []
        self.endpoints: dict = {}
        self._seq = seq if seq is not None else itertools.count()
        self.sent_count = 0
        self.delivered_count = 0

    def attach_endpoint(self, agent_id: str, handler: Optional[Handler] = None) -> CoordinationEndpoint:
        if agent_id in self.endpoints:
            raise AlreadyAttached(agent_id)
        endpoint = CoordinationEndpoint(agent_id, handler)
        self.endpoints[agent_id] = endpoint
        return endpoint

    def latency(self, src: str, dst: str) -> int:
        hops = self.transport.hops(src, dst)
        if hops is None:
            raise UnknownEndpoint(f"{dst} is unreachable from {src}")
        return hops * self.delay_per_hop

    def send(self, sender: str, to: str, payload, now: int) -> Delivery:
        for agent_id in (sender, to):
            if agent_id not in self.endpoints:
                raise UnknownEndpoint(agent_id)
        record = Delivery(now + self.latency(sender, to), next(self._seq),
                          Envelope(sender, to, now, payload))
        heapq.heappush(self.pending, record)
        self.sent_count += 1
        return record

    def peek(self) -> Optional[Delivery]:
        return self.pending[0] if self.pending else None

    def deliver_next(self) -> Delivery:
        """Pop the earliest delivery and place it in the recipient's inbox."""
        record = heapq.heappop(self.pending)
        self.endpoints[record.envelope.to].inbox.append(record.envelope)
        self.delivered_count += 1
        return record
