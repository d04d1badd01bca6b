"""Tandem topology, per-flow protocol stacks and the metrics they produce."""

from __future__ import annotations

import csv
import io
import random
import struct
from dataclasses import dataclass, field

import numpy as np

from ..galois import field_for
from ..receiver import NcReceiver
from ..sender import NcSender
from ..vegas import VegasConfig, VegasState
from ..wire import Control, TcpAck
from .engine import Simulator
from .link import Link, Packet, forward
from .tcp import TcpSender, TcpSink

PROTOCOLS = ("nc", "tcp")
CSV_COLUMNS = ("time_s", "flow_id", "throughput_mbps", "cwnd", "rtt_s", "dup_acks")
NC_ACK_HEADER = 10


@dataclass
class FlowSpec:
    flow_id: int
    protocol: str = "nc"
    start: float = 0.5
    redundancy: float = 1.0
    src: int = 0
    dst: int | None = None  # defaults to the last node
    total_packets: int | None = None  # None: unlimited backlog

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}; expected one of {PROTOCOLS}")


@dataclass
class NetConfig:
    hops: int = 4
    bandwidth: float = 1e6
    prop_delay: float = 0.1
    buffer: int = 200
    loss: float = 0.0
    data_size: int = 1000
    ack_size: int = 40
    # Bytes of real payload carried per packet; timing always uses data_size.
    payload_bytes: int = 8
    field_size: int = 256
    include_overhead: bool = False
    # Answer a duplicate ACK that signals a non-innovative arrival with one
    # extra combination.
    repair_stalls: bool = True
    # Decoding-buffer bound at each coding receiver, in packets.
    decode_buffer: int = 2000
    sample_interval: float = 2.5
    vegas: VegasConfig = field(default_factory=VegasConfig)


@dataclass
class FlowStats:
    flow_id: int
    protocol: str
    delivered_packets: int = 0
    corrupted: int = 0
    timeouts: int = 0
    dup_acks: int = 0
    coded_sent: int = 0
    nc_dup_acks: int = 0
    nc_anomalies: int = 0


@dataclass
class MetricsLog:
    rows: list[tuple] = field(default_factory=list)
    flows: dict[int, FlowStats] = field(default_factory=dict)
    links: list[dict] = field(default_factory=list)
    horizon: float = 0.0

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for t, fid, tput, cwnd, rtt, dups in self.rows:
            writer.writerow(
                [f"{t:.3f}", fid, f"{tput:.6f}", f"{cwnd:.3f}", "" if rtt is None else f"{rtt:.6f}", dups]
            )
        return out.getvalue()

    def series(self, flow_id: int) -> tuple[np.ndarray, np.ndarray]:
        """(time_s, throughput_mbps) samples of one flow."""
        pts = [(r[0], r[2]) for r in self.rows if r[1] == flow_id]
        if not pts:
            return np.zeros(0), np.zeros(0)
        t, x = zip(*pts)
        return np.asarray(t), np.asarray(x)

    def mean_throughput(self, flow_id: int, t0: float = 0.0, t1: float = float("inf")) -> float:
        """Mean of the sampled throughput over samples ending in ``(t0, t1]``."""
        t, x = self.series(flow_id)
        sel = (t > t0) & (t <= t1)
        return float(x[sel].mean()) if sel.any() else 0.0


def _payload(flow_id: int, seq: int, size: int) -> bytes:
    tag = struct.pack(">II", flow_id, seq)
    return (tag * (size // len(tag) + 1))[:size]


class Flow:
    """One source/sink pair with its TCP endpoints and optional coding layer."""

    def __init__(self, net: Network, spec: FlowSpec, rng: np.random.Generator):
        self.net = net
        self.spec = spec
        cfg = net.config
        sim = net.sim
        dst = cfg.hops if spec.dst is None else spec.dst
        self.fwd_route = net.route(spec.src, dst)
        self.rev_route = net.route(dst, spec.src)
        self.stats = FlowStats(spec.flow_id, spec.protocol)
        self.vegas = VegasState(cfg.vegas)
        self._delivered_at_sample = 0
        self.started = False

        self.tcp = TcpSender(sim, self.vegas, self._send_data, self._send_control_fwd, spec.total_packets)
        self.sink = TcpSink(sim, self._sink_ack, self._send_control_rev, self._app_deliver,
                            cfg.vegas.receive_window)
        if spec.protocol == "nc":
            gf = field_for(cfg.field_size)
            self.ncs = NcSender(spec.redundancy, gf, rng, lambda: sim.now, 1, cfg.payload_bytes)
            self.ncr = NcReceiver(gf, 1, cfg.payload_bytes, max_span=2 * cfg.vegas.receive_window,
                                   max_backlog=cfg.decode_buffer)
        else:
            self.ncs = self.ncr = None

    def start(self) -> None:
        self.started = True
        self.tcp.start()

    # source side
    def _send_data(self, seq: int, ts: float) -> None:
        cfg = self.net.config
        payload = _payload(self.spec.flow_id, seq, cfg.payload_bytes)
        if self.ncs is None:
            self._emit(self.fwd_route, "data", (seq, ts, payload), cfg.data_size, self._at_sink)
            return
        self._send_coded(self.ncs.on_tcp_packet((seq, payload)))

    def _send_coded(self, segments) -> None:
        cfg = self.net.config
        for seg in segments:
            size = cfg.data_size + (seg.header_size if cfg.include_overhead else 0)
            self.stats.coded_sent += 1
            self._emit(self.fwd_route, "coded", seg, size, self._at_sink)

    def _send_control_fwd(self, ctrl: Control) -> None:
        out = self.ncs.on_tcp_packet(ctrl, is_control=True) if self.ncs else [ctrl]
        for c in out:
            self._emit(self.fwd_route, "control", c, self.net.config.ack_size, self._at_sink)

    def _at_source(self, packet: Packet) -> None:
        if packet.kind == "control":
            self.tcp.on_control(packet.body)
        elif packet.kind == "coded-ack":
            tcp_ack = self.ncs.on_coded_ack(packet.body)
            if self.ncs.stall_detected and self.net.config.repair_stalls:
                self._send_coded(self.ncs.repair())
            self.tcp.on_ack(tcp_ack)
        else:
            self.tcp.on_ack(packet.body)

    # sink side
    def _at_sink(self, packet: Packet) -> None:
        kind = packet.kind
        if kind == "control":
            self.sink.on_control(packet.body)
        elif kind == "data":
            seq, ts, payload = packet.body
            self.sink.on_data(seq, payload, ts)
        else:
            result = self.ncr.on_coded_segment(packet.body)
            if result is None:
                return
            ack, delivered = result
            for seq, payload in delivered:
                self.sink.on_data(seq, payload, None)
            cfg = self.net.config
            size = cfg.ack_size + (NC_ACK_HEADER if cfg.include_overhead else 0)
            self._emit(self.rev_route, "coded-ack", ack, size, self._at_source)

    def _sink_ack(self, ack: TcpAck) -> None:
        if self.ncr is not None:
            ack = self.ncr.on_tcp_sink_ack(ack, is_control=False)
            if ack is None:
                return
        self._emit(self.rev_route, "ack", ack, self.net.config.ack_size, self._at_source)

    def _send_control_rev(self, ctrl: Control) -> None:
        if self.ncr is not None:
            ctrl = self.ncr.on_tcp_sink_ack(ctrl, is_control=True)
        self._emit(self.rev_route, "control", ctrl, self.net.config.ack_size, self._at_source)

    def _app_deliver(self, seq: int, payload: bytes) -> None:
        self.stats.delivered_packets += 1
        if payload != _payload(self.spec.flow_id, seq, self.net.config.payload_bytes):
            self.stats.corrupted += 1

    def _emit(self, route, kind, body, size, deliver) -> None:
        forward(Packet(self.spec.flow_id, kind, body, size, route, deliver))

    def sample(self, interval: float) -> tuple:
        delivered = self.stats.delivered_packets
        tput = (delivered - self._delivered_at_sample) * self.net.config.data_size * 8 / interval / 1e6
        self._delivered_at_sample = delivered
        return tput, self.vegas.cwnd, self.vegas.last_rtt, self.tcp.dup_acks

    def finalize(self) -> FlowStats:
        s = self.stats
        s.timeouts = self.tcp.timeouts
        s.dup_acks = self.tcp.dup_acks
        if self.ncr is not None:
            s.nc_dup_acks = self.ncr.dup_acks
            s.nc_anomalies = self.ncs.anomalies
        return s


class Network:
    """Chain of ``hops + 1`` nodes joined by forward and reverse links."""

    def __init__(self, config: NetConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        self.sim = Simulator()
        ss = np.random.SeedSequence(seed)
        link_seeds = ss.spawn(2 * config.hops)
        self._flow_seeds = ss.spawn(1)[0]
        loss = config.loss
        losses = list(loss) if isinstance(loss, (list, tuple)) else [loss] * config.hops

        def make(i: int, direction: str, s) -> Link:
            rng = random.Random(int(s.generate_state(1)[0]))
            return Link(self.sim, config.bandwidth, config.prop_delay, config.buffer, losses[i], rng,
                        f"{direction}{i}")

        self.forward_links = [make(i, "f", link_seeds[i]) for i in range(config.hops)]
        self.reverse_links = [make(i, "r", link_seeds[config.hops + i]) for i in range(config.hops)]
        self.flows: list[Flow] = []

    def route(self, src: int, dst: int) -> list[Link]:
        if not (0 <= src <= self.config.hops and 0 <= dst <= self.config.hops) or src == dst:
            raise ValueError(f"no route from node {src} to node {dst}")
        if src < dst:
            return self.forward_links[src:dst]
        return [self.reverse_links[i] for i in range(src - 1, dst - 1, -1)]

    def add_flow(self, spec: FlowSpec) -> Flow:
        rng = np.random.default_rng(self._flow_seeds.spawn(1)[0])
        flow = Flow(self, spec, rng)
        self.flows.append(flow)
        self.sim.schedule_at(spec.start, flow.start)
        return flow

    def _sample(self, interval: float, log: MetricsLog) -> None:
        now = self.sim.now
        for flow in self.flows:
            if flow.started:
                tput, cwnd, rtt, dups = flow.sample(interval)
                log.rows.append((now, flow.spec.flow_id, tput, cwnd, rtt, dups))
        self.sim.schedule(interval, self._sample, interval, log)

    def run(self, until: float) -> MetricsLog:
        log = MetricsLog(horizon=until)
        if not self.flows:
            return log
        interval = self.config.sample_interval
        self.sim.schedule(interval, self._sample, interval, log)
        self.sim.run(until)
        for flow in self.flows:
            log.flows[flow.spec.flow_id] = flow.finalize()
        for link in self.forward_links + self.reverse_links:
            log.links.append(
                dict(name=link.name, sent=link.sent, delivered=link.delivered, lost=link.lost,
                     buffer_drops=link.buffer_drops, in_flight=link.in_flight)
            )
        return log


def simulate(config: NetConfig, flows: list[FlowSpec], horizon: float, seed: int = 0) -> MetricsLog:
    net = Network(config, seed)
    for spec in flows:
        net.add_flow(spec)
    return net.run(horizon)
