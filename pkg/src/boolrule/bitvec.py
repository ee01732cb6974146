"""Bit-packed boolean vectors and column-packed matrices.

Rows are packed into arbitrary-precision Python integers (little-endian:
row i is bit i), which keeps the whole rule-evaluation hot path in C-level
integer ops and gives popcounts via ``int.bit_count``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def mask_for(n: int) -> int:
    """All-ones mask for ``n`` rows."""
    return (1 << n) - 1


@dataclass(frozen=True)
class BitVector:
    """A packed vector of ``n`` bits."""

    bits: int
    n: int

    def __post_init__(self):
        if self.bits >> self.n:
            raise ValueError("bits set beyond vector length")

    @classmethod
    def from_bools(cls, values) -> "BitVector":
        arr = np.asarray(values, dtype=bool)
        packed = np.packbits(arr, bitorder="little").tobytes()
        return cls(int.from_bytes(packed, "little"), arr.size)

    def to_bools(self) -> np.ndarray:
        raw = self.bits.to_bytes((self.n + 7) // 8, "little")
        return np.unpackbits(np.frombuffer(raw, dtype=np.uint8),
                             count=self.n, bitorder="little").astype(bool)

    def popcount(self) -> int:
        return self.bits.bit_count()

    def __and__(self, other: "BitVector") -> "BitVector":
        return BitVector(self.bits & other.bits, self.n)

    def __or__(self, other: "BitVector") -> "BitVector":
        return BitVector(self.bits | other.bits, self.n)

    def __xor__(self, other: "BitVector") -> "BitVector":
        return BitVector(self.bits ^ other.bits, self.n)

    def __invert__(self) -> "BitVector":
        return BitVector(self.bits ^ mask_for(self.n), self.n)

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> int:
        return (self.bits >> i) & 1


class BitMatrix:
    """A binary matrix stored as one packed column per feature."""

    def __init__(self, columns: list[int], num_rows: int):
        self.columns = columns
        self.num_rows = num_rows

    @classmethod
    def from_bools(cls, array) -> "BitMatrix":
        arr = np.asarray(array, dtype=bool)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array")
        cols = []
        for j in range(arr.shape[1]):
            packed = np.packbits(arr[:, j], bitorder="little").tobytes()
            cols.append(int.from_bytes(packed, "little"))
        return cls(cols, arr.shape[0])

    def to_bools(self) -> np.ndarray:
        out = np.zeros((self.num_rows, self.num_cols), dtype=bool)
        for j, col in enumerate(self.columns):
            out[:, j] = BitVector(col, self.num_rows).to_bools()
        return out

    @property
    def num_cols(self) -> int:
        return len(self.columns)

    def column(self, j: int) -> BitVector:
        return BitVector(self.columns[j], self.num_rows)

    def take_rows(self, indices) -> "BitMatrix":
        """New matrix containing only the given rows, in the given order."""
        indices = [int(i) for i in indices]
        cols = []
        for col in self.columns:
            packed = 0
            for new_i, old_i in enumerate(indices):
                packed |= ((col >> old_i) & 1) << new_i
            cols.append(packed)
        return BitMatrix(cols, len(indices))

    def __eq__(self, other) -> bool:
        return (isinstance(other, BitMatrix)
                and self.num_rows == other.num_rows
                and self.columns == other.columns)


def take_bits(vec: BitVector, indices) -> BitVector:
    """Row subset of a bit vector, in the given index order."""
    bits = 0
    indices = [int(i) for i in indices]
    for new_i, old_i in enumerate(indices):
        bits |= ((vec.bits >> old_i) & 1) << new_i
    return BitVector(bits, len(indices))
