"""Experiment runner: fairness, redundancy and loss sweeps, queue validation.

Experiments are described by INI files (see ``configs/``). Each run writes
``<name>.csv`` and ``<name>.summary.txt``; the summary embeds the fully
resolved configuration and master seed so any row can be regenerated.
"""

from __future__ import annotations

import configparser
import io
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .queue_model import ChainConfig, expected_queue_closed_form, simulate_chain
from .simnet.network import MetricsLog, NetConfig, FlowSpec, simulate
from .vegas import VegasConfig

KINDS = ("fairness", "redundancy", "loss", "queue")


@dataclass
class ExperimentSpec:
    name: str
    kind: str
    net: NetConfig = field(default_factory=NetConfig)
    flows: list[FlowSpec] = field(default_factory=list)
    horizon: float = 600.0
    seed: int = 1
    replications: int = 1
    warmup: float = 0.1  # fraction of the horizon ignored by sweeps
    redundancy_values: list[float] = field(default_factory=list)
    loss_values: list[float] = field(default_factory=list)
    # Per-loss redundancy for the coded flows of a loss sweep; empty means
    # optimal_redundancy() of each loss rate.
    loss_redundancy: list[float] = field(default_factory=list)
    chain: ChainConfig | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        for v in self.redundancy_values + self.loss_values + self.loss_redundancy + [self.horizon]:
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"sweep and horizon values must be finite and non-negative, got {v}")
        if any(r <= 0 for r in self.redundancy_values + self.loss_redundancy):
            raise ValueError("redundancy values must be positive")
        if self.loss_redundancy and len(self.loss_redundancy) != len(self.loss_values):
            raise ValueError("loss_redundancy needs one value per loss rate")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.kind == "queue" and self.chain is None:
            raise ValueError("queue experiments need a [chain] section")
        if self.kind == "fairness" and len(self.flows) < 1:
            raise ValueError("fairness experiments need at least one flow")

    def seeds(self) -> list[int]:
        return [self.seed + r for r in range(self.replications)]


# config files

def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def load_spec(path: str | Path, full_scale: bool = False, seed: int | None = None,
              include_overhead: bool | None = None) -> ExperimentSpec:
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    return spec_from_parser(parser, full_scale, seed, include_overhead)


def spec_from_parser(parser: configparser.ConfigParser, full_scale: bool = False,
                     seed: int | None = None, include_overhead: bool | None = None) -> ExperimentSpec:
    exp = parser["experiment"]

    def scaled(section, key, fallback):
        if full_scale and f"full_{key}" in section:
            return section.getfloat(f"full_{key}")
        return section.getfloat(key, fallback=fallback)

    net = NetConfig()
    vegas = VegasConfig()
    if parser.has_section("network"):
        sec = parser["network"]
        losses = _floats(sec.get("loss", "0"))
        net = NetConfig(
            hops=sec.getint("hops", net.hops),
            bandwidth=sec.getfloat("bandwidth_mbps", net.bandwidth / 1e6) * 1e6,
            prop_delay=sec.getfloat("prop_delay_s", net.prop_delay),
            buffer=sec.getint("buffer_packets", net.buffer),
            loss=losses[0] if len(losses) == 1 else losses,
            data_size=sec.getint("packet_bytes", net.data_size),
            ack_size=sec.getint("ack_bytes", net.ack_size),
            payload_bytes=sec.getint("payload_bytes", net.payload_bytes),
            field_size=sec.getint("field_size", net.field_size),
            include_overhead=sec.getboolean("include_overhead", net.include_overhead),
            repair_stalls=sec.getboolean("repair_stalls", net.repair_stalls),
            decode_buffer=sec.getint("decode_buffer", net.decode_buffer),
            sample_interval=sec.getfloat("sample_interval_s", net.sample_interval),
        )
    if parser.has_section("vegas"):
        sec = parser["vegas"]
        values = {}
        for f in fields(VegasConfig):
            if f.name not in sec:
                continue
            kind = type(getattr(vegas, f.name))
            values[f.name] = sec.getboolean(f.name) if kind is bool else kind(sec.get(f.name))
        vegas = VegasConfig(**values)
    net.vegas = vegas
    if include_overhead is not None:
        net.include_overhead = include_overhead

    flows = []
    for name in parser.sections():
        if not name.startswith("flow."):
            continue
        sec = parser[name]
        total = sec.getint("total_packets", fallback=0)
        flows.append(FlowSpec(
            flow_id=int(name.split(".", 1)[1]),
            protocol=sec.get("protocol", "nc"),
            start=scaled(sec, "start", 0.5),
            redundancy=sec.getfloat("redundancy", 1.0),
            total_packets=total or None,
        ))
    flows.sort(key=lambda f: f.flow_id)

    chain = None
    if parser.has_section("chain"):
        sec = parser["chain"]
        mu = _floats(sec["mu"])
        chain = ChainConfig(
            n_nodes=sec.getint("nodes", len(mu) + 1),
            mu=tuple(mu),
            lam=sec.getfloat("lam"),
            q=sec.getint("q", 256),
            slots=int(sec.getfloat("slots", 1e6)),
            warmup=sec.getfloat("warmup", 0.1),
            large_q=sec.getboolean("large_q", True),
            forwarding=tuple(int(x) for x in _floats(sec.get("forwarding", ""))),
        )

    sweep = parser["sweep"] if parser.has_section("sweep") else {}
    return ExperimentSpec(
        name=exp.get("name"),
        kind=exp.get("kind"),
        net=net,
        flows=flows,
        horizon=scaled(exp, "horizon", 600.0),
        seed=seed if seed is not None else exp.getint("seed", 1),
        replications=exp.getint("replications", 1),
        warmup=exp.getfloat("warmup", 0.1),
        redundancy_values=_floats(sweep.get("redundancy", "")),
        loss_values=_floats(sweep.get("loss", "")),
        loss_redundancy=_floats(sweep.get("loss_redundancy", "")),
        chain=chain,
        jobs=exp.getint("jobs", 1),
    )


def resolved_config(spec: ExperimentSpec) -> str:
    """The experiment as an INI document that load_spec reads back unchanged."""
    p = configparser.ConfigParser()
    p["experiment"] = dict(name=spec.name, kind=spec.kind, horizon=repr(spec.horizon), seed=str(spec.seed),
                           replications=str(spec.replications), warmup=repr(spec.warmup), jobs=str(spec.jobs))
    n = spec.net
    loss = n.loss if isinstance(n.loss, (list, tuple)) else [n.loss]
    p["network"] = dict(
        hops=str(n.hops), bandwidth_mbps=repr(n.bandwidth / 1e6), prop_delay_s=repr(n.prop_delay),
        buffer_packets=str(n.buffer), loss=", ".join(repr(x) for x in loss), packet_bytes=str(n.data_size),
        ack_bytes=str(n.ack_size), payload_bytes=str(n.payload_bytes), field_size=str(n.field_size),
        include_overhead=str(n.include_overhead).lower(), repair_stalls=str(n.repair_stalls).lower(),
        decode_buffer=str(n.decode_buffer), sample_interval_s=repr(n.sample_interval),
    )
    p["vegas"] = {f.name: str(getattr(n.vegas, f.name)).lower() if isinstance(getattr(n.vegas, f.name), bool)
                  else repr(getattr(n.vegas, f.name)) for f in fields(VegasConfig)}
    for f in spec.flows:
        p[f"flow.{f.flow_id}"] = dict(protocol=f.protocol, start=repr(f.start), redundancy=repr(f.redundancy),
                                      total_packets=str(f.total_packets or 0))
    sweep = {}
    if spec.redundancy_values:
        sweep["redundancy"] = ", ".join(repr(x) for x in spec.redundancy_values)
    if spec.loss_values:
        sweep["loss"] = ", ".join(repr(x) for x in spec.loss_values)
    if spec.loss_redundancy:
        sweep["loss_redundancy"] = ", ".join(repr(x) for x in spec.loss_redundancy)
    if sweep:
        p["sweep"] = sweep
    if spec.chain is not None:
        c = spec.chain
        p["chain"] = dict(nodes=str(c.n_nodes), mu=", ".join(repr(x) for x in c.mu), lam=repr(c.lam), q=str(c.q),
                          slots=str(c.slots), warmup=repr(c.warmup), large_q=str(c.large_q).lower(),
                          forwarding=", ".join(str(x) for x in c.forwarding))
    out = io.StringIO()
    p.write(out)
    return out.getvalue()


# metrics

def jain_index(xs) -> float:
    """(sum x)^2 / (n * sum x^2); 1 means equal shares. NaN when all are zero."""
    xs = [float(x) for x in xs]
    if not xs:
        raise ValueError("need at least one throughput")
    sq = sum(x * x for x in xs)
    if sq == 0:
        return math.nan
    return sum(xs) ** 2 / (len(xs) * sq)


def optimal_redundancy(loss: float, hops: int = 4, margin: float = 0.05, step: float = 0.05) -> float:
    """Smallest multiple of ``step`` at or above ``(1 + margin)`` over the end-to-end success rate.

    A small margin above the break-even redundancy keeps the receiver's
    equation deficit drifting down; at zero loss no redundancy is used.
    """
    if not 0 <= loss < 1:
        raise ValueError(f"loss rate must lie in [0, 1), got {loss}")
    if loss == 0:
        return 1.0
    target = (1 + margin) / (1 - loss) ** hops
    return round(math.ceil(target / step - 1e-9) * step, 10)


def _run_one(args) -> tuple:
    net, flows, horizon, seed = args
    log = simulate(net, flows, horizon, seed)
    return log


def _map(fn, tasks, jobs: int):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


# reports

@dataclass
class FairnessReport:
    spec: ExperimentSpec
    logs: list[MetricsLog]
    window: tuple[float, float]
    per_flow: list[dict[int, float]]  # mean throughput per flow in the window, per seed
    jain: list[float]

    def to_csv(self) -> str:
        parts = []
        for i, log in enumerate(self.logs):
            text = log.to_csv()
            parts.append(text if i == 0 else text.split("\n", 1)[1])
        return "".join(parts)

    def summary(self) -> str:
        lines = [f"fairness experiment {self.spec.name}",
                 f"window: [{self.window[0]:.1f}, {self.window[1]:.1f}] s"]
        for seed, flows, j in zip(self.spec.seeds(), self.per_flow, self.jain):
            shares = ", ".join(f"flow {k}: {v:.4f} Mbps" for k, v in sorted(flows.items()))
            lines.append(f"seed {seed}: {shares}; Jain index {j:.4f}")
        return "\n".join(lines)


@dataclass
class SweepPoint:
    parameter: str
    value: float
    protocol: str
    redundancy: float
    loss: float
    seed: int
    per_flow: dict[int, float]

    @property
    def mean(self) -> float:
        return statistics.fmean(self.per_flow.values())


@dataclass
class SweepReport:
    spec: ExperimentSpec
    points: list[SweepPoint]

    CSV_HEADER = "parameter,value,protocol,redundancy,loss,seed,flow_id,throughput_mbps\n"

    def to_csv(self) -> str:
        out = [self.CSV_HEADER]
        for p in self.points:
            for fid, x in sorted(p.per_flow.items()):
                out.append(f"{p.parameter},{p.value!r},{p.protocol},{p.redundancy!r},{p.loss!r},"
                           f"{p.seed},{fid},{x:.6f}\n")
        return "".join(out)

    def table(self, protocol: str | None = None) -> list[tuple[float, str, float, float]]:
        """(value, protocol, mean, stddev) of the per-flow throughput across seeds."""
        groups: dict[tuple[float, str], list[float]] = {}
        for p in self.points:
            if protocol is None or p.protocol == protocol:
                groups.setdefault((p.value, p.protocol), []).append(p.mean)
        rows = []
        for (value, proto), xs in sorted(groups.items()):
            sd = statistics.stdev(xs) if len(xs) > 1 else 0.0
            rows.append((value, proto, statistics.fmean(xs), sd))
        return rows

    def curve(self, protocol: str = "nc") -> tuple[list[float], list[float]]:
        rows = self.table(protocol)
        return [r[0] for r in rows], [r[2] for r in rows]

    def argmax(self, protocol: str = "nc") -> float:
        xs, ys = self.curve(protocol)
        return xs[max(range(len(ys)), key=ys.__getitem__)]

    def summary(self) -> str:
        lines = [f"{self.spec.kind} sweep {self.spec.name}; seeds {self.spec.seeds()}",
                 "value     protocol  mean_mbps  stddev_mbps"]
        for value, proto, mean, sd in self.table():
            lines.append(f"{value:<9.4g} {proto:<9} {mean:<10.4f} {sd:.4f}")
        if self.spec.kind == "redundancy":
            lines.append(f"argmax R: {self.argmax('nc'):g}")
        return "\n".join(lines)


@dataclass
class QueueReport:
    spec: ExperimentSpec
    nodes: list[int]
    measured: list[float]
    closed_form: list[float]
    sink_throughput: float

    @property
    def relative_error(self) -> list[float]:
        return [abs(m - c) / c if c else abs(m) for m, c in zip(self.measured, self.closed_form)]

    def to_csv(self) -> str:
        out = ["node,measured_mean_queue,closed_form,relative_error\n"]
        for k, m, c, e in zip(self.nodes, self.measured, self.closed_form, self.relative_error):
            out.append(f"{k},{m:.6f},{c:.6f},{e:.6f}\n")
        return "".join(out)

    def summary(self) -> str:
        c = self.spec.chain
        mode = "large-q idealization" if c.large_q else f"GF({c.q}) knowledge spaces"
        lines = [f"queue validation {self.spec.name}: N={c.n_nodes}, mu={c.mu}, lambda={c.lam}, "
                 f"{c.slots} slots, {mode}",
                 f"sink throughput {self.sink_throughput:.4f} packets/slot"]
        for k, m, cf, e in zip(self.nodes, self.measured, self.closed_form, self.relative_error):
            lines.append(f"node {k}: measured {m:.4f}, closed form {cf:.4f}, relative error {e:.2%}")
        return "\n".join(lines)


# operations

def _steady(log: MetricsLog, flows: list[FlowSpec], t0: float, t1: float) -> dict[int, float]:
    return {f.flow_id: log.mean_throughput(f.flow_id, t0, t1) for f in flows}


def run_fairness(spec: ExperimentSpec) -> FairnessReport:
    t1 = spec.horizon
    window = (t1 * 2 / 3, t1)
    tasks = [(spec.net, spec.flows, spec.horizon, s) for s in spec.seeds()]
    logs = _map(_run_one, tasks, spec.jobs)
    per_flow = [_steady(log, spec.flows, *window) for log in logs]
    jain = [jain_index(pf.values()) for pf in per_flow]
    return FairnessReport(spec, logs, window, per_flow, jain)


def run_redundancy_sweep(spec: ExperimentSpec) -> SweepReport:
    if not spec.redundancy_values:
        raise ValueError("redundancy sweep needs [sweep] redundancy values")
    t0 = spec.horizon * spec.warmup
    loss = spec.net.loss if not isinstance(spec.net.loss, (list, tuple)) else max(spec.net.loss)
    keys, tasks = [], []
    for r in spec.redundancy_values:
        flows = [replace(f, redundancy=r) if f.protocol == "nc" else f for f in spec.flows]
        for s in spec.seeds():
            keys.append((r, s, flows))
            tasks.append((spec.net, flows, spec.horizon, s))
    logs = _map(_run_one, tasks, spec.jobs)
    points = [SweepPoint("redundancy", r, "nc", r, loss, s, _steady(log, flows, t0, spec.horizon))
              for (r, s, flows), log in zip(keys, logs)]
    return SweepReport(spec, points)


def run_loss_sweep(spec: ExperimentSpec) -> SweepReport:
    if not spec.loss_values:
        raise ValueError("loss sweep needs [sweep] loss values")
    t0 = spec.horizon * spec.warmup
    keys, tasks = [], []
    for i, p in enumerate(spec.loss_values):
        r = spec.loss_redundancy[i] if spec.loss_redundancy else optimal_redundancy(p, spec.net.hops)
        net = replace(spec.net, loss=p)
        for proto in ("tcp", "nc"):
            flows = [replace(f, protocol=proto, redundancy=r if proto == "nc" else 1.0) for f in spec.flows]
            for s in spec.seeds():
                keys.append((p, proto, r if proto == "nc" else 1.0, s, flows))
                tasks.append((net, flows, spec.horizon, s))
    logs = _map(_run_one, tasks, spec.jobs)
    points = [SweepPoint("loss", p, proto, r, p, s, _steady(log, flows, t0, spec.horizon))
              for (p, proto, r, s, flows), log in zip(keys, logs)]
    return SweepReport(spec, points)


def run_queue_validation(spec: ExperimentSpec) -> QueueReport:
    chain = spec.chain
    if chain is None:
        raise ValueError("queue validation needs a chain configuration")
    if not chain.stable:
        raise ValueError(
            f"refusing unstable chain: arrival rate {chain.lam} is not below every link's ON "
            f"probability {chain.mu}"
        )
    result = simulate_chain(chain, spec.seed)
    if chain.forwarding:
        collapsed = chain.collapsed()
        closed = [expected_queue_closed_form(collapsed, k) for k in range(collapsed.n_nodes)]
    else:
        closed = [expected_queue_closed_form(chain, k) for k in range(chain.n_nodes)]
    return QueueReport(spec, result.coding_nodes, result.mean_queue, closed, result.sink_throughput)


RUNNERS = {
    "fairness": run_fairness,
    "redundancy": run_redundancy_sweep,
    "loss": run_loss_sweep,
    "queue": run_queue_validation,
}


def run_experiment(spec: ExperimentSpec):
    return RUNNERS[spec.kind](spec)


def write_outputs(spec: ExperimentSpec, report, out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{spec.name}.csv"
    summary_path = out / f"{spec.name}.summary.txt"
    csv_path.write_text(report.to_csv())
    summary_path.write_text(
        report.summary()
        + f"\n\nmaster seed: {spec.seed}\n\n# resolved configuration\n"
        + resolved_config(spec)
    )
    return csv_path, summary_path
