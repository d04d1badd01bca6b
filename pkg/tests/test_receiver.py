import numpy as np

from tcpnc.galois import GF256
from tcpnc.receiver import NcReceiver
from tcpnc.sender import NcSender
from tcpnc.wire import CodedAck, CodedSegment, Control, TcpAck, encode_segment


def test_single_uncoded_packet():
    r = NcReceiver(GF256, 1, 3)
    ack, delivered = r.on_coded_segment(CodedSegment(1, 1, bytes([1]), b"xyz"))
    assert delivered == [(1, b"xyz")]
    assert ack == CodedAck(2, 0)
    assert r.prev_serial_num == 1


def test_non_innovative_repeats_ack():
    r = NcReceiver(GF256, 1, 1)
    r.on_coded_segment(CodedSegment(1, 1, bytes([1, 1]), b"\x03"))
    ack, delivered = r.on_coded_segment(CodedSegment(2, 1, bytes([2, 2]), b"\x06"))
    assert ack == CodedAck(2, 1) and delivered == []
    assert r.prev_serial_num == 2 and r.dup_acks == 1


def test_control_and_sink_acks():
    r = NcReceiver()
    for kind in ("SYN-ACK", "FIN"):
        c = Control(kind)
        assert r.on_tcp_sink_ack(c, is_control=True) is c
    assert r.on_tcp_sink_ack(TcpAck(5, 1.0)) is None


def test_malformed_bytes_are_erasures():
    r = NcReceiver(GF256, 1, 2)
    assert r.on_coded_segment(b"\x00\x01garbage") is None
    raw = encode_segment(CodedSegment(1, 1, bytes([1]), b"ok"))
    ack, delivered = r.on_coded_segment(raw)
    assert delivered == [(1, b"ok")] and r.malformed == 1


def test_decode_buffer_bound():
    r = NcReceiver(GF256, 1, 1, max_backlog=3)
    assert r.on_coded_segment(CodedSegment(1, 1, bytes([1, 1, 1, 1]), b"\x00")) is None
    assert r.overflows == 1
    assert r.on_coded_segment(CodedSegment(2, 1, bytes([1, 1, 1]), b"\x00")) is not None


def test_in_order_delivery_under_random_loss(rng):
    """Every packet delivered exactly once, in order, byte-identical; ACKs never go backwards."""
    s = NcSender(1.5, GF256, rng, payload_size=16)
    r = NcReceiver(GF256, 1, 16)
    sent = {i: bytes(GF256.random_vector(rng, 16)) for i in range(1, 301)}
    got, last = [], 0
    for i in range(1, 301):
        for seg in s.on_tcp_packet((i, sent[i])):
            if rng.random() < 0.25:
                continue
            ack, delivered = r.on_coded_segment(seg)
            assert ack.ack_seq >= last
            last = ack.ack_seq
            got += delivered
            s.on_coded_ack(ack)
    # Flush whatever is left in the window.
    while s.window_len:
        for seg in s.repair():
            ack, delivered = r.on_coded_segment(seg)
            got += delivered
            s.on_coded_ack(ack)
    assert [i for i, _ in got] == list(range(1, 301))
    assert all(p == sent[i] for i, p in got)


def test_lossless_ack_advances_almost_always(rng):
    s = NcSender(1.0, GF256, rng, payload_size=1)
    r = NcReceiver(GF256, 1, 1)
    advanced, last, n = 0, 1, 20_000
    for i in range(1, n + 1):
        for seg in s.on_tcp_packet((i, b"\x00")):
            ack, _ = r.on_coded_segment(seg)
            advanced += ack.ack_seq > last
            last = ack.ack_seq
            s.on_coded_ack(ack)
    assert advanced / n >= 1 - 2 / 256
