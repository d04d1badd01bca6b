"""Arithmetic over GF(2^m) backed by log/antilog tables.

Elements are plain ints in ``[0, q)``; coefficient vectors are ``uint8``
numpy arrays. Two fields are prebuilt: :data:`GF256` (the default, reduction
polynomial x^8+x^4+x^3+x+1) and :data:`GF16` (x^4+x+1), the latter small
enough for exhaustive tests.
"""

from __future__ import annotations

import numpy as np

# Reduction polynomials, including the x^m term.
DEFAULT_POLYNOMIALS = {1: 0x3, 2: 0x7, 3: 0xB, 4: 0x13, 5: 0x25, 6: 0x43, 7: 0x89, 8: 0x11B}


def _clmul_mod(a: int, b: int, poly: int, bits: int) -> int:
    result = 0
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a >> bits:
            a ^= poly
    return result


class GaloisField:
    """The finite field GF(2^bits) for ``bits`` in 1..8."""

    def __init__(self, bits: int = 8, polynomial: int | None = None):
        if not 1 <= bits <= 8:
            raise ValueError(f"unsupported field width {bits}; expected 1..8 bits")
        if polynomial is None:
            polynomial = DEFAULT_POLYNOMIALS.get(bits)
            if polynomial is None:
                raise ValueError(f"no default reduction polynomial for 2^{bits}")
        self.bits = bits
        self.q = 1 << bits
        self.polynomial = polynomial
        self.generator = self._find_generator()

        order = self.q - 1
        exp = np.zeros(2 * order, dtype=np.int64)
        log = np.zeros(self.q, dtype=np.int64)
        x = 1
        for i in range(order):
            exp[i] = x
            log[x] = i
            x = _clmul_mod(x, self.generator, polynomial, bits)
        exp[order:] = exp[:order]
        self.exp = exp
        self.log = log

        # Full product table; row ``a`` maps every b to a*b.
        nz = np.arange(1, self.q)
        mul = np.zeros((self.q, self.q), dtype=np.uint8)
        mul[1:, 1:] = exp[log[nz][:, None] + log[nz][None, :]]
        self.mul_table = mul
        inv = np.zeros(self.q, dtype=np.uint8)
        inv[1:] = exp[(order - log[nz]) % order]
        self.inv_table = inv
        # Plain-list copies for scalar hot paths.
        self._mul_rows = [bytes(row) for row in mul]
        self._inv_list = inv.tolist()

    def _find_generator(self) -> int:
        order = self.q - 1
        for g in range(2, self.q) if self.q > 2 else [1]:
            x, seen = 1, set()
            for _ in range(order):
                seen.add(x)
                x = _clmul_mod(x, g, self.polynomial, self.bits)
            if len(seen) == order:
                return g
        raise ValueError(f"polynomial {self.polynomial:#x} is not primitive-capable")

    def __repr__(self) -> str:
        return f"GaloisField(bits={self.bits}, polynomial={self.polynomial:#x})"

    def _check(self, a: int) -> int:
        if not 0 <= a < self.q:
            raise ValueError(f"{a} is not an element of GF({self.q})")
        return a

    def add(self, a: int, b: int) -> int:
        return self._check(a) ^ self._check(b)

    sub = add

    def mul(self, a: int, b: int) -> int:
        return self._mul_rows[self._check(a)][self._check(b)]

    def inv(self, a: int) -> int:
        if self._check(a) == 0:
            raise ZeroDivisionError("zero has no multiplicative inverse")
        return self._inv_list[a]

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def scale(self, c: int, vec: np.ndarray) -> np.ndarray:
        """Return ``c * vec`` elementwise."""
        return self.mul_table[c][vec]

    def axpy(self, dst: np.ndarray, scale: int, src: np.ndarray) -> np.ndarray:
        """Return ``dst + scale * src``; inputs are left untouched."""
        dst = np.asarray(dst, dtype=np.uint8)
        src = np.asarray(src, dtype=np.uint8)
        if dst.shape != src.shape:
            raise ValueError(f"length mismatch: {dst.shape} vs {src.shape}")
        return dst ^ self.mul_table[self._check(scale)][src]

    def dot(self, coeffs: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Linear combination ``sum_i coeffs[i] * rows[i]`` of the rows of a matrix."""
        if len(coeffs) == 0:
            return np.zeros(rows.shape[1:], dtype=np.uint8)
        return np.bitwise_xor.reduce(self.mul_table[coeffs[:, None], rows], axis=0)

    def matmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Matrix product over the field."""
        out = np.zeros((a.shape[0], b.shape[1]), dtype=np.uint8)
        for k in range(a.shape[1]):
            out ^= self.mul_table[a[:, k][:, None], b[k][None, :]]
        return out

    def random_vector(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` independent uniform field elements."""
        # q divides 256, so masking uniform bytes stays uniform.
        v = np.frombuffer(rng.bytes(n), dtype=np.uint8)
        return v & (self.q - 1) if self.q < 256 else v.copy()


GF256 = GaloisField(8)
GF16 = GaloisField(4)


def add(a: int, b: int, field: GaloisField = GF256) -> int:
    return field.add(a, b)


def mul(a: int, b: int, field: GaloisField = GF256) -> int:
    return field.mul(a, b)


def inv(a: int, field: GaloisField = GF256) -> int:
    return field.inv(a)


def axpy(dst, scale: int, src, field: GaloisField = GF256) -> np.ndarray:
    return field.axpy(dst, scale, src)


def field_for(q: int) -> GaloisField:
    """Field of size ``q``; the prebuilt instances are reused."""
    if q == 256:
        return GF256
    if q == 16:
        return GF16
    bits = q.bit_length() - 1
    if q < 2 or 1 << bits != q:
        raise ValueError(f"field size must be a power of two, got {q}")
    return GaloisField(bits)
