"""Slotted daisy chain with re-encoding at every node.

Node 0 is the source, node ``N-1`` the sink, and link ``i`` joins node ``i``
to node ``i+1``. In each slot a packet arrives at the source with
probability ``lam``, then every node sends one random combination of the
witnesses it holds over its outgoing link, which is ON with probability
``mu[i]``. Nodes transmit in chain order, so a degree of freedom can cross
several links in one slot. The sink reports its oldest unseen packet to the
source without delay; that status travels downstream alongside the data,
and each node drops witnesses of packets the status says the sink has seen.

Two modes:

* idealized (``large_q=True``): a successful reception from a node that
  knows more always reveals the next unseen packet, so only counters are
  simulated.
* fidelity: every node keeps a real :class:`KnowledgeSpace` over GF(q).

Intermediate nodes listed in ``forwarding`` do not code: they pass a
received packet on in the same slot if their outgoing link is ON and drop
it otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coding import KnowledgeSpace
from .galois import field_for

_UNIT = np.ones(1, dtype=np.uint8)


@dataclass
class ChainConfig:
    n_nodes: int
    mu: tuple[float, ...]
    lam: float
    q: int = 256
    slots: int = 1_000_000
    warmup: float = 0.1
    large_q: bool = True
    forwarding: tuple[int, ...] = ()

    def __post_init__(self):
        self.mu = tuple(float(m) for m in self.mu)
        self.forwarding = tuple(sorted(set(self.forwarding)))
        if self.n_nodes < 2:
            raise ValueError("a chain needs at least a source and a sink")
        if len(self.mu) != self.n_nodes - 1:
            raise ValueError(f"need {self.n_nodes - 1} link probabilities, got {len(self.mu)}")
        if not all(0.0 < m <= 1.0 for m in self.mu):
            raise ValueError(f"link ON probabilities must lie in (0, 1]: {self.mu}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"arrival rate must lie in [0, 1], got {self.lam}")
        if any(not 0 < f < self.n_nodes - 1 for f in self.forwarding):
            raise ValueError("only intermediate nodes can be pure forwarders")
        if not 0.0 <= self.warmup < 1.0:
            raise ValueError(f"warm-up fraction must lie in [0, 1), got {self.warmup}")

    @property
    def rho(self) -> tuple[float, ...]:
        return tuple(self.lam / m for m in self.mu)

    @property
    def stable(self) -> bool:
        return self.lam < min(self.mu)

    def collapsed(self) -> ChainConfig:
        """Equivalent chain with every forwarding node removed.

        The merged link is ON only when all the links it replaces are.
        """
        mu = []
        merged = 1.0
        for i, m in enumerate(self.mu):
            merged *= m
            if i + 1 not in self.forwarding:
                mu.append(merged)
                merged = 1.0
        return ChainConfig(
            len(mu) + 1, tuple(mu), self.lam, self.q, self.slots, self.warmup, self.large_q
        )


def expected_queue_closed_form(cfg: ChainConfig, k: int) -> float:
    """Stationary mean number of witnesses stored at node ``k``.

    ``sum_{i>=k} rho_i (1 - mu_i) / (1 - rho_i) + sum_{i<k} rho_i`` over the
    links ``i`` of the chain.
    """
    if cfg.forwarding:
        raise ValueError("closed form applies to chains where every node codes")
    if not cfg.stable:
        raise ValueError(
            f"unstable chain: arrival rate {cfg.lam} must be below every link's ON probability {cfg.mu}"
        )
    if not 0 <= k < cfg.n_nodes:
        raise ValueError(f"node {k} outside 0..{cfg.n_nodes - 1}")
    rho, mu = cfg.rho, cfg.mu
    ahead = sum(rho[i] * (1 - mu[i]) / (1 - rho[i]) for i in range(k, len(mu)))
    behind = sum(rho[i] for i in range(k))
    return ahead + behind


@dataclass
class ChainResult:
    config: ChainConfig
    mean_queue: list[float]
    mean_sojourn: list[float]
    entry_rate: list[float]  # packets entering each node's queue per slot
    sink_throughput: float  # packets newly seen by the sink per slot
    seen: list[int]  # final cumulative seen counts
    measured_slots: int
    coding_nodes: list[int] = field(default_factory=list)

    def littles_law_gap(self, k: int) -> float:
        """Relative gap between L and lambda * W at node ``k``."""
        lhs = self.mean_queue[k]
        rhs = self.entry_rate[k] * self.mean_sojourn[k]
        return abs(lhs - rhs) / max(lhs, 1e-12)


class Chain:
    """One run of the slotted chain; ``step_slot`` advances it by one slot."""

    def __init__(self, cfg: ChainConfig, seed: int = 0):
        self.cfg = cfg
        self.rng = np.random.default_rng(seed)
        self.nodes = [k for k in range(cfg.n_nodes) if k not in cfg.forwarding]
        m = len(self.nodes)
        # Effective hop j carries node nodes[j] to nodes[j + 1] and uses the
        # physical links in between.
        self.hop_links = [list(range(self.nodes[j], self.nodes[j + 1])) for j in range(m - 1)]
        self.seen = [0] * m  # cumulative packets seen per coding node
        self.view = [0] * m  # each node's latest knowledge of the sink's seen count
        self.t = 0
        self.arrivals = 0
        # Slot at which each packet entered / left each node's queue, in order.
        self.entered: list[list[int]] = [[] for _ in range(m)]
        self.left: list[list[int]] = [[] for _ in range(m)]
        if not cfg.large_q:
            self.field = field_for(cfg.q)
            self.spaces = [KnowledgeSpace(self.field, 0) for _ in range(m)]
        else:
            self.spaces = None

    @property
    def queue(self) -> list[int]:
        return [s - v for s, v in zip(self.seen, self.view)]

    def step_slot(self, arrival: bool | None = None, on_links=None) -> None:
        """Advance one slot. Random draws may be supplied for scripted runs."""
        cfg = self.cfg
        if arrival is None:
            arrival = self.rng.random() < cfg.lam
        if on_links is None:
            on_links = (self.rng.random(len(cfg.mu)) < np.asarray(cfg.mu)).tolist()
        hop_on = [all(on_links[i] for i in links) for links in self.hop_links]
        self._step(arrival, hop_on)

    def _step(self, arrival: bool, hop_on: list[bool]) -> None:
        seen, view, t = self.seen, self.view, self.t
        spaces = self.spaces
        m = len(seen)
        if arrival:
            self.arrivals += 1
            seen[0] += 1
            self.entered[0].append(t)
            if spaces is not None:
                spaces[0].insert(_UNIT, self.arrivals - 1)
        # Transmissions in chain order: what a node receives early in the slot
        # can already go out on its own link.
        for j in range(m - 1):
            if hop_on[j] and seen[j] > seen[j + 1]:
                if spaces is not None:
                    up = spaces[j]
                    coeffs, _ = up.combination(self.rng)
                    if not spaces[j + 1].insert(coeffs, up.window_base).innovative:
                        continue
                seen[j + 1] += 1
                self.entered[j + 1].append(t)
        # Sink status moves one hop per ON link, using the views held at the
        # start of the slot; the source hears the sink directly, last.
        for j in range(m - 2, -1, -1):
            if hop_on[j] and view[j + 1] != view[j]:
                self._set_view(j + 1, view[j])
        sink = spaces[-1].oldest_unseen() if spaces is not None else seen[-1]
        if sink != view[0]:
            self._set_view(0, sink)
        self.t = t + 1

    def _set_view(self, k: int, new: int) -> None:
        old = self.view[k]
        self.view[k] = new
        if new > old:
            self.left[k].extend([self.t] * (new - old))
        if self.spaces is not None:
            self.spaces[k].drop_before(new)

    def run(self) -> ChainResult:
        cfg = self.cfg
        slots = cfg.slots
        t0 = self.t
        start = t0 + int(cfg.warmup * slots)
        end = t0 + slots
        arrivals = (self.rng.random(slots) < cfg.lam).tolist()
        on = self.rng.random((slots, len(cfg.mu))) < np.asarray(cfg.mu)
        hop_on = np.ones((slots, len(self.hop_links)), dtype=bool)
        for j, links in enumerate(self.hop_links):
            for i in links:
                hop_on[:, j] &= on[:, i]
        hop_on = hop_on.tolist()

        sink_start = None
        step = self._step
        for t in range(slots):
            if t0 + t == start:
                sink_start = self.seen[-1]
            step(arrivals[t], hop_on[t])
        if sink_start is None:
            sink_start = self.seen[-1]

        measured = end - start
        mean_queue, mean_sojourn, entry_rate = [], [], []
        for k in range(len(self.nodes)):
            enter = np.asarray(self.entered[k], dtype=np.int64)
            left = np.asarray(self.left[k], dtype=np.int64)[: len(enter)]
            leave = np.full(len(enter), end, dtype=np.int64)
            leave[: len(left)] = left
            # Queue is sampled at slot end: packet present at the end of
            # slot t iff enter <= t < leave.
            span = np.minimum(leave, end) - np.maximum(enter, start)
            mean_queue.append(float(span[span > 0].sum()) / measured)
            new = enter >= start
            done = new & (np.arange(len(enter)) < len(left))
            mean_sojourn.append(float((leave[done] - enter[done]).mean()) if done.any() else 0.0)
            entry_rate.append(int(new.sum()) / measured)
        return ChainResult(
            config=cfg,
            mean_queue=mean_queue,
            mean_sojourn=mean_sojourn,
            entry_rate=entry_rate,
            sink_throughput=(self.seen[-1] - sink_start) / measured,
            seen=list(self.seen),
            measured_slots=measured,
            coding_nodes=list(self.nodes),
        )


def simulate_chain(cfg: ChainConfig, seed: int = 0) -> ChainResult:
    return Chain(cfg, seed).run()


# Reveal experiment: one transmission from an upstream node A to a node B
# whose knowledge is contained in A's.


@dataclass
class RevealScenario:
    upstream: KnowledgeSpace
    downstream: KnowledgeSpace
    target: int  # oldest packet seen by A but not by B


def reveal_scenario(q: int, rng: np.random.Generator, packets: int = 8) -> RevealScenario:
    """Random pair of nested knowledge spaces with S_A strictly larger than S_B.

    A learns ``packets`` source packets through random combinations (some of
    them non-innovative), B hears a random subset of A's transmissions.
    """
    gf = field_for(q)
    while True:
        a = KnowledgeSpace(gf, 0)
        b = KnowledgeSpace(gf, 0)
        for _ in range(int(rng.integers(1, packets + 1))):
            hi = int(rng.integers(1, packets + 1))
            a.insert(gf.random_vector(rng, hi), 0)
        for _ in range(int(rng.integers(0, a.rank + 1))):
            coeffs, _ = a.combination(rng)
            b.insert(coeffs, a.window_base)
        gap = sorted(a.seen_set() - b.seen_set())
        if gap:
            return RevealScenario(a, b, gap[0])


def reveal_trial(scenario: RevealScenario, rng: np.random.Generator) -> bool:
    """A sends one random combination of its witnesses; did B newly see the target?"""
    a, b = scenario.upstream, scenario.downstream
    if not (a.seen_set() - b.seen_set()):
        raise ValueError("upstream must have seen a packet the downstream node has not")
    coeffs, _ = a.combination(rng)
    _, lead = b.reduce(coeffs, a.window_base)
    return lead == scenario.target


def reveal_rate(q: int, trials: int, seed: int = 0, scenarios: int = 100) -> tuple[float, float]:
    """Empirical success rate and its standard error over random scenarios."""
    rng = np.random.default_rng(seed)
    pool = [reveal_scenario(q, rng) for _ in range(scenarios)]
    hits = 0
    for t in range(trials):
        hits += reveal_trial(pool[t % scenarios], rng)
    p = hits / trials
    return p, math.sqrt(max(p * (1 - p), 1e-300) / trials)
