"""TCP-Vegas congestion control at packet granularity.

Once per RTT epoch the window is compared against the rate expected at the
base RTT; ``diff = cwnd * (1 - base_rtt / rtt)`` estimates how many of this
flow's packets sit in queues. Congestion avoidance nudges ``cwnd`` by one
packet to keep ``diff`` within ``[alpha, beta]``; slow start doubles every
other RTT until ``diff`` exceeds ``gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class VegasConfig:
    alpha: float = 28.0
    beta: float = 30.0
    gamma: float = 2.0
    receive_window: int = 100
    initial_cwnd: float = 2.0
    min_cwnd: float = 2.0
    initial_rto: float = 3.0
    min_rto: float = 1.0
    max_rto: float = 64.0
    # Canonical Vegas doubles every other RTT; False doubles every RTT.
    slow_start_every_other_rtt: bool = True

    def __post_init__(self):
        if self.alpha > self.beta:
            raise ValueError(f"alpha ({self.alpha}) must not exceed beta ({self.beta})")


class VegasState:
    def __init__(self, config: VegasConfig | None = None):
        self.config = cfg = config or VegasConfig()
        self.cwnd = float(cfg.initial_cwnd)
        self.base_rtt = math.inf
        self.srtt: float | None = None
        self.rttvar = 0.0
        self.rto = cfg.initial_rto
        self.in_slow_start = True
        self.last_rtt: float | None = None
        self._epoch_end = -math.inf
        self._epoch_min = math.inf
        self._double_next = False

    @property
    def alpha(self) -> float:
        return self.config.alpha

    @property
    def beta(self) -> float:
        return self.config.beta

    @property
    def gamma(self) -> float:
        return self.config.gamma

    def diff(self, rtt: float) -> float:
        """Estimated packets queued: (expected - actual) * base_rtt."""
        return self.cwnd * (1.0 - self.base_rtt / rtt)

    def on_rtt_sample(self, rtt: float, now: float | None = None) -> None:
        """Feed one RTT sample.

        With ``now`` given, the window moves at most once per RTT epoch using
        the smallest sample seen in that epoch; without it every sample closes
        an epoch.
        """
        if not rtt > 0:
            raise ValueError(f"RTT sample must be positive, got {rtt}")
        cfg = self.config
        self.last_rtt = rtt
        self.base_rtt = min(self.base_rtt, rtt)
        if self.srtt is None:
            self.srtt, self.rttvar = rtt, rtt / 2
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - rtt)
            self.srtt = 0.875 * self.srtt + 0.125 * rtt
        self.rto = min(max(cfg.min_rto, self.srtt + 4 * self.rttvar), cfg.max_rto)

        self._epoch_min = min(self._epoch_min, rtt)
        if now is not None and now < self._epoch_end:
            return
        self._adjust(self._epoch_min)
        self._epoch_min = math.inf
        if now is not None:
            self._epoch_end = now + rtt

    def _adjust(self, rtt: float) -> None:
        cfg = self.config
        diff = self.diff(rtt)
        if self.in_slow_start:
            if diff > cfg.gamma:
                self.in_slow_start = False
                # Fall back to the rate the path actually carried, plus one.
                self.cwnd = min(self.cwnd, self.cwnd * self.base_rtt / rtt + 1)
            elif self._double_next or not cfg.slow_start_every_other_rtt:
                self.cwnd *= 2
                self._double_next = False
            else:
                self._double_next = True
        elif diff < cfg.alpha:
            self.cwnd += 1
        elif diff > cfg.beta:
            self.cwnd -= 1
        self.cwnd = min(max(self.cwnd, cfg.min_cwnd), cfg.receive_window)

    def on_timeout(self) -> None:
        cfg = self.config
        self.cwnd = max(2.0, cfg.min_cwnd)
        self.rto = min(self.rto * 2, cfg.max_rto)
        self.in_slow_start = True
        self._double_next = False
        self._epoch_end = -math.inf
        self._epoch_min = math.inf

    def can_send(self, inflight: int) -> bool:
        return inflight < math.floor(self.cwnd)
