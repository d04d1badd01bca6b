"""Discrete-event simulator for a chain of lossy, rate-limited links."""

from .engine import Simulator
from .network import FlowSpec, MetricsLog, NetConfig, Network, simulate

__all__ = ["FlowSpec", "MetricsLog", "NetConfig", "Network", "Simulator", "simulate"]
