"""TCP with a sliding-window random linear network coding layer.

The coding layer sits between TCP and IP: the sender emits random
combinations of its un-ACKed packets and the receiver acknowledges every
degree of freedom as soon as it arrives, by the packets it has *seen*.
"""

from .coding import KnowledgeSpace, SeenReport
from .galois import GF16, GF256, GaloisField, field_for
from .receiver import NcReceiver
from .sender import NcSender
from .vegas import VegasConfig, VegasState

__all__ = [
    "GF16",
    "GF256",
    "GaloisField",
    "KnowledgeSpace",
    "NcReceiver",
    "NcSender",
    "SeenReport",
    "VegasConfig",
    "VegasState",
    "field_for",
]
