"""GF(2) linear algebra on int bitsets.

A vector of length ``k`` is a Python int whose bit ``i`` is coordinate ``i``.
A matrix is given by its list of columns (for column-space questions) or rows.
"""

from __future__ import annotations

from typing import Iterable, List


class Basis:
    """Incrementally built basis, kept keyed by leading bit."""

    def __init__(self, vectors: Iterable[int] = ()):
        self._pivots: dict[int, int] = {}
        for v in vectors:
            self.add(v)

    def reduce(self, v: int) -> int:
        while v:
            top = v.bit_length() - 1
            row = self._pivots.get(top)
            if row is None:
                return v
            v ^= row
        return 0

    def add(self, v: int) -> bool:
        """Insert ``v``; returns False if it was already in the span."""
        v = self.reduce(v)
        if not v:
            return False
        self._pivots[v.bit_length() - 1] = v
        return True

    def contains(self, v: int) -> bool:
        return self.reduce(v) == 0

    def canonical(self, v: int) -> int:
        """Unique representative of the coset ``v + span``.

        Fully reduces every pivot position, so two vectors share a coset iff
        their canonical forms are equal.
        """
        for top in sorted(self._pivots, reverse=True):
            if (v >> top) & 1:
                v ^= self._pivots[top]
        return v

    @property
    def rank(self) -> int:
        return len(self._pivots)

    def vectors(self) -> List[int]:
        return [self._pivots[k] for k in sorted(self._pivots, reverse=True)]

    def __len__(self) -> int:
        return len(self._pivots)


def rank(vectors: Iterable[int]) -> int:
    return Basis(vectors).rank


def colspace_member(columns: List[int], v: int, n_rows: int) -> bool:
    """True iff ``v`` lies in the span of ``columns`` (each an ``n_rows``-bit int)."""
    limit = 1 << n_rows
    if v >= limit or v < 0 or any(c >= limit or c < 0 for c in columns):
        raise ValueError(f"dimension mismatch: vectors must have {n_rows} bits")
    return Basis(columns).contains(v)


def transpose(rows: List[int], n_cols: int) -> List[int]:
    """Rows (ints of ``n_cols`` bits) -> columns (ints of ``len(rows)`` bits)."""
    cols = [0] * n_cols
    for i, row in enumerate(rows):
        r = row
        while r:
            low = r & -r
            cols[low.bit_length() - 1] |= 1 << i
            r ^= low
    return cols


def matvec(rows: List[int], v: int) -> int:
    """``M @ v`` over GF(2) with ``M`` given as row bitsets."""
    out = 0
    for i, row in enumerate(rows):
        if (row & v).bit_count() & 1:
            out |= 1 << i
    return out
