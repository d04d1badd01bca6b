"""Sink-side network-coding layer.

Absorbs coded segments into a knowledge space, hands decoded packets to the
TCP sink strictly in order, and answers every arrival with an ACK for the
oldest unseen packet. Each ACK carries the serial number of the arrival
that triggered the previous ACK, which the sender uses for RTT matching.
"""

from __future__ import annotations

import logging

import numpy as np

from .coding import KnowledgeSpace
from .galois import GF256, GaloisField
from .wire import MAX_WINDOW_SPAN, CodedAck, CodedSegment, WireError, decode_segment

log = logging.getLogger(__name__)


class NcReceiver:
    def __init__(
        self,
        field: GaloisField = GF256,
        window_base: int = 1,
        payload_size: int = 1000,
        max_span: int = MAX_WINDOW_SPAN,
        max_backlog: int | None = None,
    ):
        self.ks = KnowledgeSpace(field, window_base, payload_size)
        self.payload_size = payload_size
        self.max_span = max_span
        # Bound on the decoding buffer, in packet indices past the oldest
        # undelivered one. None means unbounded.
        self.max_backlog = max_backlog
        self.prev_serial_num = 0
        # Every index below this has been delivered upward.
        self.delivered_up_to = window_base
        self._ready: dict[int, bytes] = {}
        self._last_ack: int | None = None
        self.arrivals = 0
        self.innovative = 0
        self.dup_acks = 0
        self.malformed = 0
        self.overflows = 0

    def on_coded_segment(self, seg: CodedSegment | bytes) -> tuple[CodedAck, list[tuple[int, bytes]]] | None:
        """Process one arrival; returns the ACK and newly deliverable packets.

        Malformed segments are treated as erasures and yield ``None``.
        """
        if isinstance(seg, (bytes, bytearray)):
            try:
                seg = decode_segment(seg, self.payload_size, self.max_span)
            except WireError as exc:
                log.debug("dropping malformed segment: %s", exc)
                self.malformed += 1
                return None
        if seg.window_len > self.max_span or seg.window_base < self.ks.window_base:
            self.malformed += 1
            return None
        if self.max_backlog is not None and seg.window_base + seg.window_len - self.delivered_up_to > self.max_backlog:
            # No room to store it: same as an erasure.
            self.overflows += 1
            return None

        self.arrivals += 1
        # Columns below the sender's window never appear again; decoded and
        # delivered rows there can go.
        self.ks.drop_before(min(self.delivered_up_to, seg.window_base))
        report = self.ks.insert(np.frombuffer(seg.coeffs, dtype=np.uint8), seg.window_base, seg.payload)
        if report.innovative:
            self.innovative += 1
        for index, payload in report.decoded:
            self._ready[index] = payload
        delivered = []
        while self.delivered_up_to in self._ready:
            delivered.append((self.delivered_up_to, self._ready.pop(self.delivered_up_to)))
            self.delivered_up_to += 1

        ack = CodedAck(self.ks.oldest_unseen(), self.prev_serial_num)
        if ack.ack_seq == self._last_ack:
            self.dup_acks += 1
        self._last_ack = ack.ack_seq
        self.prev_serial_num = seg.tx_serial_num
        return ack, delivered

    def on_tcp_sink_ack(self, ack, is_control: bool = False):
        """Forward connection-management packets; data ACKs are ours to make."""
        return ack if is_control else None
