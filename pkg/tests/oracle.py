"""Slow reference implementations used as independent oracles by the tests."""

from tcpnc.galois import GF256


def rref(rows, field=GF256):
    """Fully reduced echelon form of a list of int lists, via scalar field ops.

    Returns ``(basis, pivots)`` with zero rows removed.
    """
    m = [list(r) for r in rows]
    width = max((len(r) for r in m), default=0)
    for r in m:
        r.extend([0] * (width - len(r)))
    pivots = []
    rank = 0
    for col in range(width):
        piv = next((i for i in range(rank, len(m)) if m[i][col]), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        s = field.inv(m[rank][col])
        m[rank] = [field.mul(s, x) for x in m[rank]]
        for i in range(len(m)):
            if i != rank and m[i][col]:
                f = m[i][col]
                m[i] = [a ^ field.mul(f, b) for a, b in zip(m[i], m[rank])]
        pivots.append(col)
        rank += 1
    return m[:rank], pivots


def rank(rows, field=GF256):
    return len(rref(rows, field)[1])


def combine(coeffs, payloads, field=GF256):
    """sum_i coeffs[i] * payloads[i] over bytes."""
    out = [0] * len(payloads[0])
    for c, p in zip(coeffs, payloads):
        if c:
            for j, b in enumerate(p):
                out[j] ^= field.mul(c, b)
    return bytes(out)
