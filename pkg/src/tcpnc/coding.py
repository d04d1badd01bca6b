"""Knowledge-space bookkeeping: incremental RREF, seen packets, witnesses, decoding.

A node's knowledge is the span of the coefficient vectors it has received.
The basis is kept in row-reduced echelon form over a sliding window of
packet indices; the pivot columns are exactly the *seen* packets and the
pivot row of a seen packet is its witness. Payload rows undergo the same row
operations as coefficient rows, so a packet is decoded as soon as its row
reduces to a unit vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .galois import GF256, GaloisField

_EMPTY = np.zeros(0, dtype=np.uint8)


@dataclass
class SeenReport:
    """Outcome of inserting one received combination."""

    newly_seen: int | None = None
    innovative: bool = False
    decoded: list[tuple[int, bytes]] = field(default_factory=list)


@njit(cache=True)
def _absorb(coeffs, offset, colmap, cshift, coef, pay, n, slot_col, decoded, mul, inv, p, out):
    """Reduce one combination into spare row ``n`` and eliminate its pivot.

    ``coeffs[i]`` is the coefficient of relative column ``offset + i``;
    ``colmap[rel + cshift]`` maps a column to its pivot row (>= 0) or unseen
    slot (-(slot + 1)). Returns the pivot slot (-1: not innovative, -2: a
    coefficient lies below the window) and the number of newly decoded rows
    written to ``out``.
    """
    ucap = coef.shape[1]
    plen = pay.shape[1]
    u = coef[n]
    pp = pay[n]
    u[:] = 0
    if p.shape[0]:
        pp[:] = p
    else:
        pp[:] = 0
    for i in range(coeffs.shape[0]):
        c = coeffs[i]
        if c == 0:
            continue
        rel = offset + i
        if rel < 0:
            return -2, 0
        code = colmap[rel + cshift]
        if code < 0:
            u[-code - 1] ^= c
        else:
            # In RREF the multiplier of each pivot row is the original entry.
            mc = mul[c]
            for s in range(ucap):
                x = coef[code, s]
                if x:
                    u[s] ^= mc[x]
            for b in range(plen):
                pp[b] ^= mc[pay[code, b]]

    js = -1
    best = 0
    for s in range(ucap):
        if u[s] and (js < 0 or slot_col[s] < best):
            js = s
            best = slot_col[s]
    if js < 0:
        return -1, 0

    lead = u[js]
    if lead != 1:
        ms = mul[inv[lead]]
        for s in range(ucap):
            u[s] = ms[u[s]]
        for b in range(plen):
            pp[b] = ms[pp[b]]

    nd = 0
    for r in range(n):
        f = coef[r, js]
        if f == 0:
            continue
        mf = mul[f]
        clean = True
        for s in range(ucap):
            if u[s]:
                coef[r, s] ^= mf[u[s]]
            if coef[r, s]:
                clean = False
        for b in range(plen):
            pay[r, b] ^= mf[pp[b]]
        if clean and not decoded[r]:
            decoded[r] = True
            out[nd] = r
            nd += 1

    u[js] = 0
    clean = True
    for s in range(ucap):
        if u[s]:
            clean = False
            break
    decoded[n] = clean
    if clean:
        out[nd] = n
        nd += 1
    return js, nd


@njit(cache=True)
def _drop(coef, pay, pivot, decoded, n, slot_col, k, freed):
    """Remove rows with pivot below ``k`` and free slots of unseen columns below it.

    Rows keep their relative order. Returns the new row count and the number
    of freed slots written to ``freed``.
    """
    m = 0
    for r in range(n):
        if pivot[r] >= k:
            if m != r:
                coef[m] = coef[r]
                pay[m] = pay[r]
                pivot[m] = pivot[r]
                decoded[m] = decoded[r]
            m += 1
    nf = 0
    for s in range(slot_col.shape[0]):
        if 0 <= slot_col[s] < k:
            for r in range(m):
                coef[r, s] = 0
            slot_col[s] = -1
            freed[nf] = s
            nf += 1
    return m, nf


@njit(cache=True)
def _combine(u, coef, pay, pivot, n, slot_col, base, mul, out, pout):
    """Accumulate ``sum_r u[r] * witness_r`` into dense ``out`` and ``pout``."""
    ucap = coef.shape[1]
    plen = pay.shape[1]
    for r in range(n):
        c = u[r]
        if c == 0:
            continue
        out[pivot[r] - base] ^= c
        mc = mul[c]
        for s in range(ucap):
            x = coef[r, s]
            if x:
                out[slot_col[s] - base] ^= mc[x]
        for b in range(plen):
            pout[b] ^= mc[pay[r, b]]


class KnowledgeSpace:
    """RREF basis matrix plus the parallel payload matrix.

    Columns cover packet indices ``[window_base, window_base + width)``.
    ``payload_size`` may be 0 when only the coefficient algebra matters.

    Because the basis is fully reduced, a row is zero at every pivot column
    except its own. Rows are therefore stored sparsely: the pivot entry (a 1)
    is implicit and the remaining coefficients live in a small pool of slots,
    one per unseen column. Row operations cost O(rank x unseen) regardless of
    how wide the window is.
    """

    def __init__(
        self,
        field: GaloisField = GF256,
        window_base: int = 0,
        payload_size: int = 0,
    ):
        self.field = field
        self.window_base = window_base
        self.payload_size = payload_size
        self._span = 0
        self._n = 0
        # Row storage, capacity may exceed _n.
        self._coef = np.zeros((0, 0), dtype=np.uint8)  # row x slot
        self._payloads = np.zeros((0, payload_size), dtype=np.uint8)
        self._pivot = np.zeros(0, dtype=np.int64)  # absolute pivot of each row
        self._decoded = np.zeros(0, dtype=bool)
        # Slot pool for unseen columns; _slot_col is -1 for a free slot.
        self._slot_col = np.zeros(0, dtype=np.int64)
        self._free: list[int] = []
        # Per column (absolute index minus _col0): pivot row if >= 0, else
        # -(slot + 1). Entries below window_base are stale.
        self._col0 = window_base
        self._colmap = np.zeros(0, dtype=np.int64)

    def __len__(self) -> int:
        return self._n

    def __repr__(self) -> str:
        return (
            f"KnowledgeSpace(q={self.field.q}, base={self.window_base}, "
            f"rank={len(self)}, width={self.width})"
        )

    @property
    def width(self) -> int:
        return self._span

    @property
    def rank(self) -> int:
        return self._n

    def copy(self) -> KnowledgeSpace:
        other = KnowledgeSpace(self.field, self.window_base, self.payload_size)
        other._span = self._span
        other._n = self._n
        other._coef = self._coef.copy()
        other._payloads = self._payloads.copy()
        other._pivot = self._pivot.copy()
        other._decoded = self._decoded.copy()
        other._slot_col = self._slot_col.copy()
        other._free = list(self._free)
        other._col0 = self._col0
        other._colmap = self._colmap.copy()
        return other

    # storage management
    def _grow(self, width: int) -> None:
        """Extend the window to ``width`` columns; new columns are unseen."""
        if width <= self._span:
            return
        shift = self.window_base - self._col0
        if shift + width > len(self._colmap):
            if shift:
                # Re-anchor the column map at the window base.
                self._colmap = self._colmap[shift:]
                self._col0 = self.window_base
                shift = 0
            extra = max(width - len(self._colmap), 64, len(self._colmap) // 2)
            self._colmap = np.concatenate([self._colmap, np.zeros(extra, np.int64)])
        new = width - self._span
        while len(self._free) < new:
            self._add_slots(max(new - len(self._free), 16, len(self._slot_col) // 2))
        if new == 1:
            slot = self._free.pop()
            self._slot_col[slot] = self.window_base + self._span
            self._colmap[shift + self._span] = -(slot + 1)
        else:
            slots = np.asarray([self._free.pop() for _ in range(new)], dtype=np.int64)
            cols = np.arange(self._span, width)
            self._slot_col[slots] = cols + self.window_base
            self._colmap[cols + shift] = -(slots + 1)
        self._span = width

    def _add_slots(self, extra: int) -> None:
        cap = len(self._slot_col)
        self._coef = np.hstack([self._coef, np.zeros((self._coef.shape[0], extra), np.uint8)])
        self._slot_col = np.concatenate([self._slot_col, np.full(extra, -1, np.int64)])
        # Pop from the end hands out the lowest slot first.
        self._free.extend(range(cap + extra - 1, cap - 1, -1))

    def _add_capacity(self) -> None:
        extra = max(16, self._coef.shape[0] // 2)
        self._coef = np.vstack([self._coef, np.zeros((extra, self._coef.shape[1]), np.uint8)])
        self._payloads = np.vstack([self._payloads, np.zeros((extra, self.payload_size), np.uint8)])
        self._pivot = np.concatenate([self._pivot, np.zeros(extra, np.int64)])
        self._decoded = np.concatenate([self._decoded, np.zeros(extra, bool)])

    def _dense(self, row: int) -> np.ndarray:
        out = np.zeros(self._span, dtype=np.uint8)
        out[self._pivot[row] - self.window_base] = 1
        used = np.flatnonzero(self._slot_col >= 0)
        out[self._slot_col[used] - self.window_base] = self._coef[row, used]
        return out

    # reduction
    def _split(self, coeffs, window_base: int) -> tuple[np.ndarray, np.ndarray]:
        """Non-zero entries of a combination as (values, column-map codes)."""
        coeffs = np.asarray(coeffs, dtype=np.uint8)
        offset = window_base - self.window_base
        nz = np.flatnonzero(coeffs)
        if offset < 0 and len(nz) and nz[0] < -offset:
            raise ValueError(
                f"combination references packet {window_base + int(nz[0])}, "
                f"below the window base {self.window_base}"
            )
        if len(nz):
            self._grow(offset + int(nz[-1]) + 1)
        return coeffs[nz], self._colmap[nz + offset + self.window_base - self._col0]

    def _reduce(self, coeffs, window_base: int, p: np.ndarray | None):
        """Reduced combination as a slot vector, plus the reduced payload.

        In RREF the multiplier for each pivot row is the original entry of
        the combination in that pivot column, so the whole reduction is one
        linear combination of rows.
        """
        vals, codes = self._split(coeffs, window_base)
        u = np.zeros(len(self._slot_col), dtype=np.uint8)
        unseen = codes < 0
        u[-codes[unseen] - 1] = vals[unseen]
        rows = codes[~unseen]
        if len(rows):
            c = vals[~unseen]
            u ^= self.field.dot(c, self._coef[rows])
            if p is not None:
                p = p ^ self.field.dot(c, self._payloads[rows])
        return u, p

    def reduce(self, coeffs, window_base: int | None = None) -> tuple[np.ndarray, int | None]:
        """Reduce a combination against the basis without storing it.

        Returns the reduced vector (aligned to the current window) and the
        absolute index of its leading non-zero entry, or ``None`` when the
        combination is not innovative.
        """
        if window_base is None:
            window_base = self.window_base
        u, _ = self._reduce(coeffs, window_base, None)
        out = np.zeros(self._span, dtype=np.uint8)
        nz = np.flatnonzero(u)
        out[self._slot_col[nz] - self.window_base] = u[nz]
        lead = int(self._slot_col[nz].min()) if len(nz) else None
        return out, lead

    def insert(self, coeffs, window_base: int | None = None, payload=None) -> SeenReport:
        """Absorb one received combination and report what changed."""
        if window_base is None:
            window_base = self.window_base
        p = _EMPTY
        if self.payload_size and payload is not None:
            p = np.frombuffer(payload, dtype=np.uint8) if isinstance(payload, bytes) else np.asarray(payload, np.uint8)
            if len(p) != self.payload_size:
                raise ValueError(f"payload must be {self.payload_size} bytes, got {len(p)}")
        coeffs = np.asarray(coeffs, dtype=np.uint8)
        offset = window_base - self.window_base
        self._grow(offset + len(coeffs))
        n = self._n
        if n == self._coef.shape[0]:
            self._add_capacity()
        out = np.empty(n + 1, dtype=np.int64)
        js, nd = _absorb(coeffs, offset, self._colmap, self.window_base - self._col0, self._coef,
                         self._payloads, n, self._slot_col, self._decoded,
                         self.field.mul_table, self.field.inv_table, p, out)
        if js == -2:
            first = int(np.flatnonzero(coeffs)[0])
            raise ValueError(
                f"combination references packet {window_base + first}, "
                f"below the window base {self.window_base}"
            )
        if js < 0:
            return SeenReport()

        pivot = int(self._slot_col[js])
        self._n = n + 1
        self._pivot[n] = pivot
        self._slot_col[js] = -1
        self._free.append(js)
        self._colmap[pivot - self._col0] = n

        report = SeenReport(newly_seen=pivot, innovative=True)
        if nd:
            rows = out[:nd]
            if nd > 1:
                rows = rows[np.argsort(self._pivot[rows])]
            for r in rows.tolist():
                data = self._payloads[r].tobytes() if self.payload_size else b""
                report.decoded.append((int(self._pivot[r]), data))
        return report

    # queries
    def _order(self) -> np.ndarray:
        return np.argsort(self._pivot[: self._n])

    @property
    def basis(self) -> np.ndarray:
        """Dense basis matrix, one row per seen packet, sorted by pivot."""
        rows = self._order()
        out = np.zeros((len(rows), self._span), dtype=np.uint8)
        for i, r in enumerate(rows.tolist()):
            out[i] = self._dense(r)
        return out

    @property
    def payloads(self) -> np.ndarray:
        return self._payloads[self._order()]

    @property
    def pivots(self) -> list[int]:
        return sorted(self._pivot[: self._n].tolist())

    def seen_set(self) -> set[int]:
        return set(self._pivot[: self._n].tolist())

    def decoded_set(self) -> set[int]:
        n = self._n
        return set(self._pivot[:n][self._decoded[:n]].tolist())

    def _row_of(self, k: int) -> int:
        rel = k - self.window_base
        if 0 <= rel < self._span:
            code = self._colmap[k - self._col0]
            if code >= 0:
                return int(code)
        raise KeyError(f"packet {k} has not been seen")

    def is_decoded(self, k: int) -> bool:
        try:
            return bool(self._decoded[self._row_of(k)])
        except KeyError:
            return False

    def oldest_unseen(self) -> int:
        """Smallest index at or above the window base that is not a pivot."""
        if len(self._free) == len(self._slot_col):
            return self.window_base + self._span
        used = self._slot_col[self._slot_col >= 0]
        return int(used.min())

    def witness(self, k: int) -> np.ndarray:
        """Coefficients (aligned at ``window_base``) of the witness of seen packet ``k``."""
        return self._dense(self._row_of(k))

    def payload_of(self, k: int) -> bytes:
        """Payload row stored with the witness of ``k``; the packet itself once decoded."""
        return self._payloads[self._row_of(k)].tobytes()

    def drop_before(self, k: int) -> None:
        """Forget every row whose pivot precedes ``k`` and slide the window to ``k``.

        Coefficients on dropped unseen columns are discarded as well.
        """
        if k <= self.window_base:
            return
        n = self._n
        freed = np.empty(len(self._slot_col), dtype=np.int64)
        m, nf = _drop(self._coef, self._payloads, self._pivot, self._decoded, n, self._slot_col, k, freed)
        if nf:
            self._free.extend(freed[:nf].tolist())
        self._span = max(self._span - (k - self.window_base), 0)
        self.window_base = k
        self._n = m
        if m < n and m:
            self._colmap[self._pivot[:m] - self._col0] = np.arange(m)

    def combination(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray | None]:
        """A uniformly random combination of the stored witnesses.

        Returns ``(coeffs, payload)`` with coefficients aligned at
        ``window_base``.
        """
        n = self._n
        u = self.field.random_vector(rng, n)
        out = np.zeros(self._span, dtype=np.uint8)
        if not n:
            return out, None
        pout = np.zeros(self.payload_size, dtype=np.uint8)
        _combine(u, self._coef, self._payloads, self._pivot, n, self._slot_col, self.window_base,
                 self.field.mul_table, out, pout)
        return out, (pout if self.payload_size else None)
