import numpy as np
import pytest

from tcpnc.queue_model import (Chain, ChainConfig, RevealScenario, expected_queue_closed_form, reveal_rate,
                               reveal_scenario, reveal_trial, simulate_chain)
from tcpnc.coding import KnowledgeSpace
from tcpnc.galois import GF256


def source_queue_markov(lam, mu, cap=400):
    """Stationary mean of the two-node source queue, sampled at slot end, by a linear solve.

    Each slot: an arrival with probability lam, then one departure if the
    link is ON and the queue is non-empty.
    """
    p = np.zeros((cap, cap))
    for n in range(cap):
        for a, pa in ((1, lam), (0, 1 - lam)):
            m = n + a
            for on, po in ((1, mu), (0, 1 - mu)):
                nxt = min(m - (1 if on and m > 0 else 0), cap - 1)
                p[n, nxt] += pa * po
    a = np.vstack([p.T - np.eye(cap), np.ones(cap)])
    b = np.zeros(cap + 1)
    b[-1] = 1
    pi = np.linalg.lstsq(a, b, rcond=None)[0]
    return float(pi @ np.arange(cap))


def test_closed_form_two_nodes():
    cfg = ChainConfig(2, (0.8,), 0.4)
    assert expected_queue_closed_form(cfg, 0) == pytest.approx(0.2)
    assert source_queue_markov(0.4, 0.8) == pytest.approx(0.2, abs=1e-6)


def test_closed_form_index_convention():
    cfg = ChainConfig(4, (0.9, 0.8, 0.85), 0.5)
    rho = [0.5 / m for m in cfg.mu]
    ahead = lambda k: sum(rho[i] * (1 - cfg.mu[i]) / (1 - rho[i]) for i in range(k, 3))
    for k in range(4):
        assert expected_queue_closed_form(cfg, k) == pytest.approx(ahead(k) + sum(rho[:k]))
    # the sink stores only what the status has not yet cleared
    assert expected_queue_closed_form(cfg, 3) == pytest.approx(sum(rho))


def test_queues_shrink_toward_sink_at_high_load():
    cfg = ChainConfig(5, (0.5,) * 4, 0.49)
    q = [expected_queue_closed_form(cfg, k) for k in range(5)]
    assert q[0] > q[-1]


def test_unstable_rejected():
    with pytest.raises(ValueError):
        expected_queue_closed_form(ChainConfig(3, (0.9, 0.5), 0.5), 0)
    with pytest.raises(ValueError):
        ChainConfig(3, (0.9,), 0.5)


def test_monte_carlo_two_nodes():
    res = simulate_chain(ChainConfig(2, (0.8,), 0.4, slots=400_000), seed=3)
    assert res.mean_queue[0] == pytest.approx(0.2, rel=0.05)


def test_no_arrivals_no_queues():
    res = simulate_chain(ChainConfig(4, (0.9, 0.8, 0.85), 0.0, slots=10_000), seed=1)
    assert res.mean_queue == [0.0] * 4 and res.seen == [0] * 4


def test_lossless_pipeline_delivers_within_slot_budget():
    chain = Chain(ChainConfig(4, (1.0, 1.0, 1.0), 0.7), seed=2)
    arrivals = []
    for t in range(2000):
        chain.step_slot()
        arrivals.append(chain.arrivals)
        # Every arrival up to N-1 slots ago has reached the sink.
        assert chain.seen[-1] >= arrivals[max(t - 3, 0)]


@pytest.mark.parametrize("large_q", [True, False])
def test_information_flows_downstream(large_q):
    chain = Chain(ChainConfig(4, (0.6, 0.9, 0.7), 0.5, q=16, large_q=large_q), seed=5)
    prev = list(chain.seen)
    for _ in range(3000):
        chain.step_slot()
        s = chain.seen
        assert all(a >= b for a, b in zip(s, prev))
        assert all(s[k] >= s[k + 1] for k in range(3))
        assert all(v <= sv for v, sv in zip(chain.view, s))
        prev = list(s)


def test_fidelity_mode_tracks_real_spaces():
    chain = Chain(ChainConfig(3, (0.8, 0.7), 0.5, q=256, large_q=False), seed=4)
    for _ in range(2000):
        chain.step_slot()
        for k, ks in enumerate(chain.spaces):
            assert ks.rank == chain.queue[k]


def test_littles_law():
    res = simulate_chain(ChainConfig(4, (0.9, 0.8, 0.85), 0.5, slots=300_000), seed=8)
    for k in range(4):
        assert res.littles_law_gap(k) < 0.02
        assert res.entry_rate[k] == pytest.approx(0.5, rel=0.02)


def test_forwarding_matches_collapsed_chain():
    fwd = ChainConfig(4, (0.9, 0.8, 0.85), 0.5, slots=300_000, forwarding=(2,))
    col = fwd.collapsed()
    assert col.mu == pytest.approx((0.9, 0.8 * 0.85))
    a = simulate_chain(fwd, seed=1).sink_throughput
    b = simulate_chain(col, seed=2).sink_throughput
    assert a == pytest.approx(b, rel=0.02)


def test_reveal_rate_q2():
    p, se = reveal_rate(2, 20_000, seed=3)
    assert abs(p - 0.5) < 4 * se


def test_reveal_precondition():
    a = KnowledgeSpace(GF256, 0)
    a.insert([1, 2], 0)
    with pytest.raises(ValueError):
        reveal_trial(RevealScenario(a, a.copy(), 0), np.random.default_rng(0))


def test_reveal_scenarios_are_nested(rng):
    for _ in range(50):
        sc = reveal_scenario(16, rng)
        assert sc.target in sc.upstream.seen_set() - sc.downstream.seen_set()
        # B learned only from A, so A's span contains B's.
        for row in sc.downstream.basis:
            assert sc.upstream.reduce(row)[1] is None
