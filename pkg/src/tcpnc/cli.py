"""Command-line entry point: ``tcpnc run <cfg>`` and ``tcpnc queue ...``."""

from __future__ import annotations

import argparse
import sys

from .experiments import ExperimentSpec, load_spec, run_experiment, run_queue_validation, write_outputs
from .queue_model import ChainConfig


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tcpnc", description="TCP with network coding: experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment described by an INI file")
    run.add_argument("config", help="experiment .cfg file")
    run.add_argument("--paper-scale", dest="full_scale", action="store_true", help="use the full-length horizons (full_* keys)")
    run.add_argument("--seed", type=int, default=None, help="override the master seed")
    run.add_argument("--out", default=".", help="output directory (default: current)")
    run.add_argument("--include-overhead", action="store_true",
                     help="charge coding headers against link time")
    run.add_argument("--jobs", type=int, default=None, help="parallel simulation processes")

    queue = sub.add_parser("queue", help="validate the chain queue formula; CSV on stdout")
    queue.add_argument("--mu", required=True, help="link ON probabilities, comma separated")
    queue.add_argument("--lam", type=float, required=True, help="arrival probability per slot")
    queue.add_argument("--slots", type=int, default=1_000_000)
    queue.add_argument("--q", type=int, default=256, help="field size when --exact is given")
    queue.add_argument("--exact", action="store_true", help="simulate real knowledge spaces over GF(q)")
    queue.add_argument("--forwarding", default="", help="nodes that only forward, comma separated")
    queue.add_argument("--seed", type=int, default=1)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            spec = load_spec(args.config, args.full_scale, args.seed,
                             True if args.include_overhead else None)
            if args.jobs is not None:
                spec.jobs = args.jobs
            report = run_experiment(spec)
            csv_path, summary_path = write_outputs(spec, report, args.out)
            print(report.summary())
            print(f"wrote {csv_path} and {summary_path}")
        else:
            mu = _floats(args.mu)
            chain = ChainConfig(len(mu) + 1, mu, args.lam, q=args.q, slots=args.slots,
                                large_q=not args.exact,
                                forwarding=tuple(int(x) for x in _floats(args.forwarding)))
            spec = ExperimentSpec(name="queue", kind="queue", chain=chain, seed=args.seed)
            sys.stdout.write(run_queue_validation(spec).to_csv())
    except (ValueError, OSError, KeyError) as exc:
        print(f"tcpnc: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
