"""Acceptance gate: one test per criterion, each at its stated tolerance.

Every test records a PASS/FAIL line that is printed in the terminal summary.
"""

import time
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from tcpnc.coding import KnowledgeSpace
from tcpnc.experiments import (load_spec, run_experiment, run_fairness, run_loss_sweep, run_redundancy_sweep,
                               write_outputs)
from tcpnc.galois import GF256, field_for
from tcpnc.queue_model import ChainConfig, expected_queue_closed_form, reveal_rate, simulate_chain
from tcpnc.receiver import NcReceiver
from tcpnc.sender import NcSender
from tcpnc.wire import CodedAck

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@contextmanager
def criterion(n, title, limit_s=None):
    """Record PASS/FAIL for criterion ``n``; the body fills ``detail``."""
    detail = {}
    start = time.perf_counter()
    ok = False
    try:
        yield detail
        elapsed = time.perf_counter() - start
        detail["time"] = f"{elapsed:.1f}s"
        if limit_s is not None:
            assert elapsed < limit_s, f"took {elapsed:.1f}s, limit {limit_s}s"
        ok = True
    finally:
        info = ", ".join(f"{k}={v}" for k, v in detail.items())
        ACCEPTANCE_LINES.append(f"criterion {n}: {'PASS' if ok else 'FAIL'} {title} ({info})")


# 1. soundness

def _schedule(kind, n, rng, q):
    """Yield (lo, coeffs) transmissions over packets 1..n for one loss/coding pattern."""
    gf = field_for(q)
    budget = 3 * n + 8
    for t in range(budget):
        if kind == "random-loss":
            if rng.random() < 0.3:
                continue
            yield 0, gf.random_vector(rng, n)
        elif kind == "burst-loss":
            # the middle third of the transmissions is wiped out
            if budget // 3 <= t < 2 * budget // 3:
                continue
            yield 0, gf.random_vector(rng, n)
        elif kind == "sliding":
            # protocol-like: window grows by one packet per transmission and
            # its base jumps forward at random
            hi = min(n, t // 2 + 1)
            lo = int(rng.integers(0, hi))
            yield lo, gf.random_vector(rng, hi - lo)
        elif kind == "sparse":
            v = gf.random_vector(rng, n)
            v[rng.random(n) < 0.8] = 0
            yield 0, v
        elif kind == "reversed":
            # newest packets first, then everything
            k = n - 1 - (t % n)
            yield k, gf.random_vector(rng, n - k)
        elif kind == "duplicates":
            v = gf.random_vector(rng, n)
            yield 0, v
            yield 0, v
            yield 0, gf.mul_table[int(rng.integers(1, q))][v]


PATTERNS = ("random-loss", "burst-loss", "sliding", "sparse", "reversed", "duplicates")


def test_criterion_1_soundness():
    with criterion(1, "soundness: all seen => all decoded byte-exactly", 60) as d:
        rng = np.random.default_rng(2024)
        runs = complete = failures = 0
        for i in range(1200):
            q = (16, 256)[i % 2]
            kind = PATTERNS[(i // 2) % len(PATTERNS)]
            n = int(rng.integers(1, 65))
            gf = field_for(q)
            files = [bytes(gf.random_vector(rng, 16)) for _ in range(n)]
            mat = np.frombuffer(b"".join(files), np.uint8).reshape(n, 16)
            ks = KnowledgeSpace(gf, 1, payload_size=16)
            arrivals = list(_schedule(kind, n, rng, q))
            if kind == "sparse":
                order = rng.permutation(len(arrivals))
                arrivals = [arrivals[j] for j in order]
            for lo, coeffs in arrivals:
                payload = gf.dot(coeffs, mat[lo:lo + len(coeffs)])
                ks.insert(coeffs, 1 + lo, payload)
            runs += 1
            if ks.seen_set() == set(range(1, n + 1)):
                complete += 1
                ok = ks.decoded_set() == set(range(1, n + 1)) and all(
                    ks.payload_of(k + 1) == files[k] for k in range(n))
                failures += not ok
        d.update(runs=runs, all_seen=complete, failures=failures)
        assert runs >= 1000 and complete >= 500
        assert failures == 0


# 2. seeing the oldest missing packet

def test_criterion_2_reveal_frequency():
    with criterion(2, "one transmission reveals the oldest missing packet w.p. 1-1/q", 60) as d:
        for q in (16, 256):
            p, se = reveal_rate(q, 100_000, seed=q)
            z = abs(p - (1 - 1 / q)) / se
            d[f"q{q}"] = f"{p:.5f}({z:.2f}se)"
            assert z <= 3


# 3. queue sizes

MU = (0.9, 0.8, 0.85)


def test_criterion_3_queue_closed_form():
    with criterion(3, "per-node mean queue vs closed form", 120) as d:
        for large_q, tol in ((True, 0.05), (False, 0.07)):
            cfg = ChainConfig(4, MU, 0.5, q=256, slots=1_000_000, large_q=large_q)
            res = simulate_chain(cfg, seed=11)
            errs = [abs(m - expected_queue_closed_form(cfg, k)) / expected_queue_closed_form(cfg, k)
                    for k, m in enumerate(res.mean_queue)]
            d["ideal" if large_q else "gf256"] = f"max_err={max(errs):.2%}"
            assert max(errs) < tol


# 4. forwarding node collapse

def test_criterion_4_forwarding_collapse():
    with criterion(4, "forwarding node vs collapsed chain throughput") as d:
        fwd = ChainConfig(4, MU, 0.5, slots=1_000_000, forwarding=(2,))
        a = simulate_chain(fwd, seed=21).sink_throughput
        b = simulate_chain(fwd.collapsed(), seed=22).sink_throughput
        gap = abs(a - b) / b
        d.update(forwarding=f"{a:.4f}", collapsed=f"{b:.4f}", gap=f"{gap:.2%}")
        assert gap < 0.02


# 5. redundancy sweep

def _unimodal(ys):
    k = int(np.argmax(ys))
    return all(ys[i] <= ys[i + 1] for i in range(k)) and all(ys[i] >= ys[i + 1] for i in range(k, len(ys) - 1))


def test_criterion_5_redundancy_sweep():
    with criterion(5, "throughput vs R: unimodal, argmax in [1.15, 1.35], peak >= 0.30 Mbps", 600) as d:
        spec = load_spec(CONFIGS / "redundancy_sweep.cfg")
        assert spec.horizon == 2000 and spec.replications >= 3
        rep = run_redundancy_sweep(spec)
        xs, ys = rep.curve("nc")
        d.update(curve=" ".join(f"{x:g}:{y:.3f}" for x, y in zip(xs, ys)), argmax=rep.argmax())
        assert _unimodal(ys)
        assert 1.15 <= rep.argmax() <= 1.35
        assert max(ys) >= 0.30


# 6. loss sweep at 5%

def test_criterion_6_loss_sweep():
    with criterion(6, "5% loss: coded >= 20x plain TCP, plain TCP <= 0.05 Mbps", 600) as d:
        spec = replace(load_spec(CONFIGS / "loss_sweep.cfg"), loss_values=[0.05])
        rep = run_loss_sweep(spec)
        rows = {p: m for _, p, m, _ in rep.table()}
        d.update(tcp=f"{rows['tcp']:.4f}", nc=f"{rows['nc']:.4f}",
                 ratio=f"{rows['nc'] / max(rows['tcp'], 1e-12):.1f}x")
        assert rows["tcp"] <= 0.05
        assert rows["nc"] >= 20 * rows["tcp"]
        assert rows["nc"] > 0


# 7. fairness

def test_criterion_7_fairness():
    with criterion(7, "Jain index > 0.95 over the final third", 300) as d:
        for name in ("nc_nc", "tcp_nc", "nc_tcp"):
            spec = load_spec(CONFIGS / f"fairness_{name}.cfg")
            assert spec.net.loss == 0 and all(f.redundancy == 1 for f in spec.flows)
            j = run_fairness(spec).jain[0]
            d[name] = f"{j:.4f}"
            assert j > 0.95


# 8. determinism

def test_criterion_8_determinism(tmp_path):
    with criterion(8, "identical config and seed give byte-identical CSV") as d:
        for cfg in ("fairness_tcp_nc.cfg", "queue_validation.cfg"):
            spec = load_spec(CONFIGS / cfg)
            if spec.chain is not None:
                spec.chain.slots = 100_000
            else:
                spec = replace(spec, horizon=200.0)
            a, _ = write_outputs(spec, run_experiment(spec), tmp_path / "a")
            b, _ = write_outputs(spec, run_experiment(spec), tmp_path / "b")
            same = a.read_bytes() == b.read_bytes()
            d[spec.name] = "identical" if same else "differs"
            assert same


# 9. RTT matching across erased transmissions

def test_criterion_9_rtt_matching():
    with criterion(9, "ACK after transmission 4 echoes transmission 2's time") as d:
        now = [0.0]
        s = NcSender(0.0, GF256, np.random.default_rng(7), lambda: now[0], 1, 4)
        for i in range(1, 5):
            s.on_tcp_packet((i, bytes([i]) * 4))
        s.redundancy = 1.0
        segs = []
        for t in (1.0, 2.0, 3.0, 4.0):
            now[0] = t
            segs += s.on_tcp_packet((4, bytes([4]) * 4))
        assert all(seg.window_len == 4 for seg in segs)
        r = NcReceiver(GF256, 1, 4)
        first, _ = r.on_coded_segment(segs[0])
        s.on_coded_ack(first)
        ack, _ = r.on_coded_segment(segs[3])  # transmissions 2 and 3 erased
        assert ack == CodedAck(3, 1)
        echo = s.on_coded_ack(ack).ts_echo
        d.update(ack=ack.ack_seq, prev_serial=ack.prev_serial_num, echo=echo)
        assert echo == 2.0
