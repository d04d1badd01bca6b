"""Source-side network-coding layer.

Sits between the TCP sender and the network. Every packet TCP hands down
joins the coding window until an ACK covers it; for each one, ``R`` random
linear combinations of the whole window go out on average. Incoming ACKs
are rewritten so TCP measures the RTT of a degree of freedom: the echoed
timestamp is that of the transmission right after the one that triggered
the receiver's previous ACK.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from typing import Callable

import numpy as np

from .galois import GF256, GaloisField
from .wire import CodedAck, CodedSegment, TcpAck

log = logging.getLogger(__name__)


class NcSender:
    def __init__(
        self,
        redundancy: float = 1.0,
        field: GaloisField = GF256,
        rng: np.random.Generator | None = None,
        clock: Callable[[], float] = lambda: 0.0,
        window_base: int = 1,
        payload_size: int = 1000,
    ):
        if redundancy < 0:
            raise ValueError(f"redundancy must be non-negative, got {redundancy}")
        self.redundancy = redundancy
        self.field = field
        self.rng = rng if rng is not None else np.random.default_rng()
        self.clock = clock
        self.payload_size = payload_size
        self.window_base = window_base  # oldest un-ACKed packet
        # Window payloads live in _buf[_lo:_hi]; the buffer is compacted or
        # doubled when it fills.
        self._buf = np.zeros((64, payload_size), dtype=np.uint8)
        self._lo = self._hi = 0
        self.tx_serial_num = 0
        self.num_accumulator = 0.0
        # (transmit time, coding-window end) per serial, from _tx_first on.
        self._tx_log: deque[tuple[float, int]] = deque()
        self._tx_first = 1
        self.last_ack_seq: int | None = None
        self.stall_detected = False
        self.repairs = 0
        self.anomalies = 0

    @property
    def window_len(self) -> int:
        return self._hi - self._lo

    @property
    def _window(self) -> np.ndarray:
        return self._buf[self._lo : self._hi]

    def _append(self, row: np.ndarray) -> None:
        if self._hi == len(self._buf):
            n = self.window_len
            buf = self._buf if 2 * n <= len(self._buf) else np.zeros((2 * len(self._buf), self.payload_size), np.uint8)
            buf[:n] = self._buf[self._lo : self._hi]
            self._buf, self._lo, self._hi = buf, 0, n
        self._buf[self._hi] = row
        self._hi += 1

    @property
    def coding_window(self) -> list[int]:
        return list(range(self.window_base, self.window_base + self.window_len))

    def tx_time(self, serial: int) -> float:
        return self._tx_log[serial - self._tx_first][0]

    def on_tcp_packet(self, pkt, is_control: bool = False) -> list:
        """Handle one packet from TCP; returns what goes down to the network.

        ``pkt`` is ``(index, payload)`` for data; control packets are
        returned untouched.
        """
        if is_control:
            return [pkt]
        index, payload = pkt
        if index < self.window_base:
            # Already ACKed; TCP has simply not heard yet.
            return []
        end = self.window_base + self.window_len
        if index == end:
            row = np.frombuffer(bytes(payload), dtype=np.uint8)
            if len(row) != self.payload_size:
                raise ValueError(f"payload must be {self.payload_size} bytes, got {len(row)}")
            self._append(row)
        elif index > end:
            raise ValueError(f"packet {index} skips ahead of the coding window end {end}")

        self.num_accumulator += self.redundancy
        count = math.floor(self.num_accumulator)
        self.num_accumulator -= count
        return [self._emit() for _ in range(count)]

    def _emit(self) -> CodedSegment:
        n = self.window_len
        coeffs = self.field.random_vector(self.rng, n)
        if n and not coeffs.any():
            coeffs = self.field.random_vector(self.rng, n)
        payload = self.field.dot(coeffs, self._window) if n else np.zeros(self.payload_size, np.uint8)
        self.tx_serial_num += 1
        self._tx_log.append((self.clock(), self.window_base + n))
        return CodedSegment(self.tx_serial_num, self.window_base, coeffs.tobytes(), payload.tobytes())

    def on_coded_ack(self, ack: CodedAck) -> TcpAck:
        """Translate a coded ACK into the ACK TCP sees."""
        target = ack.prev_serial_num + 1
        if target > self.tx_serial_num:
            self.anomalies += 1
            log.warning("ACK matched to serial %d, beyond last transmission %d", target, self.tx_serial_num)
            target = self.tx_serial_num
        entry = None
        if self._tx_log:
            entry = self._tx_log[max(target - self._tx_first, 0)]
        echo = entry[0] if entry else None

        # A repeated ACK while the matched transmission still held packets the
        # receiver has not seen means a combination arrived that was not
        # innovative; the lost degree of freedom has to be replaced.
        self.stall_detected = (
            ack.ack_seq == self.last_ack_seq and entry is not None and ack.ack_seq < entry[1]
        )
        self.last_ack_seq = ack.ack_seq

        drop = ack.ack_seq - self.window_base
        if drop > 0:
            self._lo = min(self._lo + drop, self._hi)
            self.window_base = ack.ack_seq

        # Serial PREV+1 onward may still be matched by later ACKs.
        while len(self._tx_log) > 1 and self._tx_first <= ack.prev_serial_num:
            self._tx_log.popleft()
            self._tx_first += 1
        return TcpAck(ack.ack_seq, echo)

    def repair(self) -> list[CodedSegment]:
        """One extra combination of the current window, outside the R budget."""
        if not self.window_len:
            return []
        self.repairs += 1
        return [self._emit()]
