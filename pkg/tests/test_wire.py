import pytest
from hypothesis import given
from hypothesis import strategies as st

from tcpnc.wire import (CodedAck, CodedSegment, WireError, decode_ack, decode_segment, encode_ack,
                        encode_segment, header_size)

GOLDEN_SEGMENT = bytes.fromhex("4e01" "00000007" "00000003" "0002" "01" "fe") + b"ab"
GOLDEN_ACK = bytes.fromhex("4eac" "00000005" "00000002")


def test_segment_golden_bytes():
    seg = CodedSegment(7, 3, bytes([1, 0xFE]), b"ab")
    assert encode_segment(seg) == GOLDEN_SEGMENT
    assert decode_segment(GOLDEN_SEGMENT, payload_size=2) == seg
    assert header_size(2) == 14 and seg.header_size == 14


def test_ack_golden_bytes():
    assert encode_ack(CodedAck(5, 2)) == GOLDEN_ACK
    assert decode_ack(GOLDEN_ACK) == CodedAck(5, 2)


@pytest.mark.parametrize("data", [
    GOLDEN_SEGMENT[:5],
    b"\x00\x00" + GOLDEN_SEGMENT[2:],
    GOLDEN_SEGMENT + b"x",
])
def test_malformed_segments(data):
    with pytest.raises(WireError):
        decode_segment(data, payload_size=2)


def test_window_span_limit():
    seg = CodedSegment(1, 1, bytes(201), b"")
    with pytest.raises(WireError):
        decode_segment(encode_segment(seg), payload_size=0, max_span=200)


def test_malformed_ack():
    with pytest.raises(WireError):
        decode_ack(GOLDEN_ACK[:-1])
    with pytest.raises(WireError):
        decode_ack(b"\x4e\x01" + GOLDEN_ACK[2:])


@given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1), st.binary(max_size=200), st.binary(min_size=8, max_size=8))
def test_segment_round_trip(serial, base, coeffs, payload):
    seg = CodedSegment(serial, base, coeffs, payload)
    assert decode_segment(encode_segment(seg), payload_size=8) == seg
