"""GF(2) linear algebra on integer bitsets.

A binary matrix is a sequence of Python ints, one per row; bit j of
``rows[i]`` (LSB-first) holds entry (i, j).  Vectors use the same packing,
so there is no width limit beyond what ints can hold.
"""
from __future__ import annotations

from collections.abc import Iterable, Sequence

__all__ = [
    "EchelonBasis",
    "identity",
    "is_invertible",
    "mat_vec",
    "matmul",
    "rank",
    "sample_matrix",
    "sample_invertible",
]


class EchelonBasis:
    """Growable row basis kept with pairwise-distinct leading (most significant) bits."""

    def __init__(self, rows: Iterable[int] = ()) -> None:
        self._pivots: dict[int, int] = {}
        for v in rows:
            self.add(v)

    def __len__(self) -> int:
        return len(self._pivots)

    def add(self, v: int) -> bool:
        """Insert a vector; returns True if it enlarged the span."""
        v = self.residual(v)
        if v == 0:
            return False
        self._pivots[v.bit_length() - 1] = v
        return True

    def residual(self, v: int) -> int:
        """Reduce v against the basis; the result is 0 iff v lies in the span."""
        while v:
            row = self._pivots.get(v.bit_length() - 1)
            if row is None:
                break
            v ^= row
        return v

    def __contains__(self, v: int) -> bool:
        return self.residual(v) == 0

    def coset_min(self, v: int) -> int:
        """Smallest integer in the coset v + span(basis).

        Clearing pivot bits from the highest down is optimal: any span element
        has its own leading bit at some pivot, so re-setting a cleared pivot
        can only increase the value.
        """
        for p in sorted(self._pivots, reverse=True):
            if (v >> p) & 1:
                v ^= self._pivots[p]
        return v


def rank(rows: Iterable[int]) -> int:
    """Rank of the matrix with the given bitset rows."""
    return len(EchelonBasis(rows))


def is_invertible(rows: Sequence[int], n: int) -> bool:
    """True iff the n x n matrix is invertible over GF(2)."""
    return len(rows) == n and rank(rows) == n


def identity(n: int) -> list[int]:
    return [1 << i for i in range(n)]


def matmul(a: Sequence[int], b: Sequence[int]) -> list[int]:
    """Row-bitset product A @ B: row i of the result XORs the rows of B picked by A[i]."""
    out = []
    for row in a:
        acc = 0
        r = row
        while r:
            j = (r & -r).bit_length() - 1
            acc ^= b[j]
            r &= r - 1
        out.append(acc)
    return out


def mat_vec(rows: Sequence[int], v: int) -> int:
    """Matrix-vector product over GF(2); bit i of the result is parity(rows[i] & v)."""
    out = 0
    for i, row in enumerate(rows):
        out |= ((row & v).bit_count() & 1) << i
    return out


def sample_matrix(n: int, rng) -> list[int]:
    """Uniformly random n x n binary matrix (n <= 63)."""
    return [int(rng.integers(0, 1 << n)) for _ in range(n)]


def sample_invertible(n: int, rng) -> list[int]:
    """Uniformly random element of GL(n, 2) by rejection sampling.

    The acceptance probability is prod(1 - 2^-k) > 0.288 for every n, so the
    expected number of draws is below 4.
    """
    while True:
        rows = sample_matrix(n, rng)
        if is_invertible(rows, n):
            return rows
