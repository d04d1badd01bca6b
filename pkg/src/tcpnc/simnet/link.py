"""FIFO drop-tail link with bandwidth, propagation delay and Bernoulli erasures."""

from __future__ import annotations

import random
from collections import deque
from typing import Callable

from .engine import Simulator


class Packet:
    """What travels over links. ``route`` is the list of links still to cross."""

    __slots__ = ("flow_id", "kind", "body", "size", "route", "hop", "deliver")

    def __init__(self, flow_id: int, kind: str, body, size: int, route: list, deliver: Callable):
        self.flow_id = flow_id
        self.kind = kind
        self.body = body
        self.size = size
        self.route = route
        self.hop = 0
        self.deliver = deliver


def forward(packet: Packet) -> None:
    """Send a packet along its route, or hand it to its endpoint at the end."""
    if packet.hop < len(packet.route):
        link = packet.route[packet.hop]
        packet.hop += 1
        link.transmit(packet)
    else:
        packet.deliver(packet)


class Link:
    """One direction of a hop.

    Serialization is ``size * 8 / bandwidth``; a packet finishing
    serialization at ``t`` reaches the far end at ``t + prop_delay`` unless
    erased. The erasure draw is taken in FIFO order, so a lost packet still
    occupies the link. ``buffer`` bounds packets waiting behind the one in
    service.
    """

    def __init__(
        self,
        sim: Simulator,
        bandwidth: float,
        prop_delay: float,
        buffer: int,
        loss_prob: float = 0.0,
        rng: random.Random | None = None,
        name: str = "",
    ):
        if not 0.0 <= loss_prob <= 1.0:
            raise ValueError(f"loss probability {loss_prob} outside [0, 1]")
        self.sim = sim
        self.bandwidth = bandwidth
        self.prop_delay = prop_delay
        self.buffer = buffer
        self.loss_prob = loss_prob
        self.rng = rng or random.Random(0)
        self.name = name
        self._departures: deque[float] = deque()
        self.busy_until = 0.0
        self.sent = 0
        self.delivered = 0
        self.lost = 0
        self.buffer_drops = 0

    def queue_length(self) -> int:
        """Packets waiting (excluding the one being serialized)."""
        now = self.sim.now
        deps = self._departures
        while deps and deps[0] <= now:
            deps.popleft()
        return max(len(deps) - 1, 0)

    @property
    def in_flight(self) -> int:
        return self.sent - self.delivered - self.lost - self.buffer_drops

    def transmit(self, packet: Packet) -> bool:
        """Offer a packet to the link; returns False on a buffer drop."""
        self.sent += 1
        now = self.sim.now
        deps = self._departures
        while deps and deps[0] <= now:
            deps.popleft()
        if len(deps) > self.buffer:
            self.buffer_drops += 1
            return False
        start = self.busy_until if self.busy_until > now else now
        done = start + packet.size * 8.0 / self.bandwidth
        self.busy_until = done
        deps.append(done)
        if self.loss_prob and self.rng.random() < self.loss_prob:
            self.lost += 1
        else:
            self.sim.schedule_at(done + self.prop_delay, self._arrive, packet)
        return True

    def _arrive(self, packet: Packet) -> None:
        self.delivered += 1
        forward(packet)
