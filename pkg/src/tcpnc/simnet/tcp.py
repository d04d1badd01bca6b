"""Packet-granularity TCP endpoints driven by Vegas.

Sequence numbers count 1000-byte packets starting at 1. There is no fast
retransmit: duplicate ACKs are only counted, and loss recovery is by
retransmission timeout followed by go-back-N.
"""

from __future__ import annotations

from typing import Callable

from ..vegas import VegasState
from ..wire import Control, TcpAck
from .engine import Simulator


class TcpSender:
    def __init__(
        self,
        sim: Simulator,
        vegas: VegasState,
        send_data: Callable[[int, float], None],
        send_control: Callable[[Control], None],
        total_packets: int | None = None,
    ):
        self.sim = sim
        self.vegas = vegas
        self.send_data = send_data
        self.send_control = send_control
        self.total_packets = total_packets
        self.receive_window = vegas.config.receive_window
        self.established = False
        self.snd_una = 1
        self.snd_nxt = 1
        self.dup_acks = 0
        self.timeouts = 0
        self.transmissions = 0
        self._deadline: float | None = None
        self._timer = None

    @property
    def inflight(self) -> int:
        return self.snd_nxt - self.snd_una

    def start(self) -> None:
        self.send_control(Control("SYN", self.sim.now))
        self._arm()

    def on_control(self, ctrl: Control) -> None:
        if ctrl.kind == "SYN-ACK" and not self.established:
            self.established = True
            self._deadline = None
            self._pump()

    def _limit(self) -> float:
        return float("inf") if self.total_packets is None else self.total_packets + 1

    def _pump(self) -> None:
        limit = self._limit()
        vegas = self.vegas
        while (
            self.snd_nxt < limit
            and self.snd_nxt - self.snd_una < self.receive_window
            and vegas.can_send(self.snd_nxt - self.snd_una)
        ):
            seq = self.snd_nxt
            self.snd_nxt += 1
            self.transmissions += 1
            self.send_data(seq, self.sim.now)
        if self.snd_una < self.snd_nxt and self._deadline is None:
            self._arm()

    def on_ack(self, ack: TcpAck) -> None:
        if not self.established:
            return
        now = self.sim.now
        if ack.ack_seq > self.snd_una:
            self.snd_una = ack.ack_seq
            if self.snd_nxt < self.snd_una:
                self.snd_nxt = self.snd_una
            if ack.ts_echo is not None and now > ack.ts_echo:
                self.vegas.on_rtt_sample(now - ack.ts_echo, now)
            if self.snd_una < self.snd_nxt:
                self._arm()
            else:
                self._deadline = None
            self._pump()
        else:
            self.dup_acks += 1

    def _arm(self) -> None:
        self._deadline = self.sim.now + self.vegas.rto
        if self._timer is None:
            self._timer = self.sim.schedule_at(self._deadline, self._on_timer)

    def _on_timer(self) -> None:
        self._timer = None
        if self._deadline is None:
            return
        if self._deadline > self.sim.now:
            self._timer = self.sim.schedule_at(self._deadline, self._on_timer)
            return
        self._deadline = None
        self.timeouts += 1
        self.vegas.on_timeout()
        if not self.established:
            self.start()
            return
        self.snd_nxt = self.snd_una
        self._pump()


class TcpSink:
    """Cumulative-ACK receiver that buffers out-of-order packets."""

    def __init__(
        self,
        sim: Simulator,
        send_ack: Callable[[TcpAck], None],
        send_control: Callable[[Control], None],
        deliver: Callable[[int, bytes], None],
        receive_window: int = 100,
    ):
        self.sim = sim
        self.send_ack = send_ack
        self.send_control = send_control
        self.deliver = deliver
        self.receive_window = receive_window
        self.rcv_nxt = 1
        self._buffer: dict[int, bytes] = {}

    def on_control(self, ctrl: Control) -> None:
        if ctrl.kind == "SYN":
            self.send_control(Control("SYN-ACK", ctrl.ts))

    def on_data(self, seq: int, payload: bytes, ts: float | None) -> None:
        if seq == self.rcv_nxt:
            self.deliver(seq, payload)
            self.rcv_nxt += 1
            while self.rcv_nxt in self._buffer:
                self.deliver(self.rcv_nxt, self._buffer.pop(self.rcv_nxt))
                self.rcv_nxt += 1
        elif self.rcv_nxt < seq < self.rcv_nxt + self.receive_window:
            self._buffer.setdefault(seq, payload)
        self.send_ack(TcpAck(self.rcv_nxt, ts))
