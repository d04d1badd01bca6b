"""Messages of the network-coding layer and their big-endian byte layouts.

Data segment::

    magic 0x4E01 | tx_serial_num u32 | window_base u32 | window_len u16
    | window_len coefficient bytes | payload

ACK::

    magic 0x4EAC | ack_seq u32 | prev_serial_num u32
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

DATA_MAGIC = 0x4E01
ACK_MAGIC = 0x4EAC
PACKET_SIZE = 1000
MAX_WINDOW_SPAN = 200

_SEG_HEADER = struct.Struct(">HIIH")
_ACK = struct.Struct(">HII")


class WireError(ValueError):
    """Raised when bytes do not decode to a well-formed message."""


@dataclass(frozen=True)
class CodedSegment:
    tx_serial_num: int
    window_base: int
    coeffs: bytes
    payload: bytes

    @property
    def window_len(self) -> int:
        return len(self.coeffs)

    @property
    def header_size(self) -> int:
        return header_size(self.window_len)


@dataclass(frozen=True)
class CodedAck:
    ack_seq: int
    prev_serial_num: int


@dataclass(frozen=True)
class TcpAck:
    """Transport-visible cumulative ACK; ``ts_echo`` feeds the RTT estimator."""

    ack_seq: int
    ts_echo: float | None


@dataclass(frozen=True)
class Control:
    """Connection-management packet (SYN, SYN-ACK, FIN, ...). Never coded."""

    kind: str
    ts: float = 0.0


def header_size(window_len: int) -> int:
    return _SEG_HEADER.size + window_len


def encode_segment(seg: CodedSegment) -> bytes:
    if seg.window_len > 0xFFFF:
        raise WireError(f"window of {seg.window_len} packets does not fit a u16")
    return (
        _SEG_HEADER.pack(DATA_MAGIC, seg.tx_serial_num, seg.window_base, seg.window_len)
        + bytes(seg.coeffs)
        + bytes(seg.payload)
    )


def decode_segment(
    data: bytes,
    payload_size: int = PACKET_SIZE,
    max_span: int = MAX_WINDOW_SPAN,
) -> CodedSegment:
    if len(data) < _SEG_HEADER.size:
        raise WireError(f"segment truncated at {len(data)} bytes")
    magic, serial, base, wlen = _SEG_HEADER.unpack_from(data)
    if magic != DATA_MAGIC:
        raise WireError(f"bad segment magic {magic:#06x}")
    if wlen > max_span:
        raise WireError(f"window of {wlen} packets exceeds the allowed span {max_span}")
    expected = _SEG_HEADER.size + wlen + payload_size
    if len(data) != expected:
        raise WireError(f"segment is {len(data)} bytes, expected {expected}")
    start = _SEG_HEADER.size
    return CodedSegment(serial, base, bytes(data[start : start + wlen]), bytes(data[start + wlen :]))


def encode_ack(ack: CodedAck) -> bytes:
    return _ACK.pack(ACK_MAGIC, ack.ack_seq, ack.prev_serial_num)


def decode_ack(data: bytes) -> CodedAck:
    if len(data) != _ACK.size:
        raise WireError(f"ACK is {len(data)} bytes, expected {_ACK.size}")
    magic, ack_seq, prev = _ACK.unpack(data)
    if magic != ACK_MAGIC:
        raise WireError(f"bad ACK magic {magic:#06x}")
    return CodedAck(ack_seq, prev)
