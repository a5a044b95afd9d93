"""Vector primitives: sparse/dense vectors, lp norms, Hölder conjugate pairs.

Dense vectors are plain float64 numpy arrays. Sparse vectors carry their own
dimension so storage and models can grow independently. Dot products accumulate
in ascending index order with no pairwise or compensated summation, so the same
inputs produce bit-identical results everywhere (the stored margins double as
sort keys and must be reproducible across backends).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

DenseVector = np.ndarray

INF = math.inf


class DimensionMismatch(ValueError):
    """An operation mixed vectors of incompatible dimension."""


def dense(values: Iterable[float]) -> DenseVector:
    """Materialize a float64 dense vector."""
    return np.asarray(list(values), dtype=np.float64)


class SparseVector:
    """Sparse feature vector: strictly increasing indices, no explicit zeros."""

    __slots__ = ("entries", "dimension")

    def __init__(self, entries: Sequence[tuple[int, float]], dimension: int):
        if dimension <= 0:
            raise ValueError(f"dimension must be positive, got {dimension}")
        prev = -1
        for idx, val in entries:
            if idx <= prev:
                raise ValueError(f"indices must be strictly increasing, saw {idx} after {prev}")
            if idx >= dimension:
                raise ValueError(f"index {idx} out of range for dimension {dimension}")
            if val == 0.0:
                raise ValueError(f"explicit zero stored at index {idx}")
            prev = idx
        self.entries = [(int(i), float(v)) for i, v in entries]
        self.dimension = int(dimension)

    @classmethod
    def from_dict(cls, mapping: Mapping[int, float], dimension: int) -> "SparseVector":
        items = sorted((i, v) for i, v in mapping.items() if v != 0.0)
        return cls(items, dimension)

    @property
    def nnz(self) -> int:
        return len(self.entries)

    def to_dense(self) -> DenseVector:
        out = np.zeros(self.dimension, dtype=np.float64)
        for i, v in self.entries:
            out[i] = v
        return out

    def scale(self, a: float) -> "SparseVector":
        # products that underflow to zero are dropped, not stored
        return SparseVector(
            [(i, v * a) for i, v in self.entries if v * a != 0.0], self.dimension
        )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SparseVector)
            and self.dimension == other.dimension
            and self.entries == other.entries
        )

    def __repr__(self) -> str:
        return f"SparseVector({self.entries!r}, dim={self.dimension})"


Vector = Union[SparseVector, DenseVector]


@dataclass(frozen=True)
class HolderPair:
    """Conjugate exponents (p, q) with 1/p + 1/q = 1; (1, inf), (inf, 1) allowed."""

    p: float
    q: float

    def __post_init__(self):
        for e in (self.p, self.q):
            if not (e >= 1.0):
                raise ValueError(f"exponents must lie in [1, inf], got {e}")
        inv = (0.0 if self.p == INF else 1.0 / self.p) + (0.0 if self.q == INF else 1.0 / self.q)
        if abs(inv - 1.0) > 1e-12:
            raise ValueError(f"not conjugate: 1/{self.p} + 1/{self.q} != 1")


def conjugate(p: float) -> HolderPair:
    """Return the Hölder pair (p, q) solving 1/p + 1/q = 1."""
    if not (p >= 1.0):
        raise ValueError(f"p must lie in [1, inf], got {p}")
    if p == INF:
        return HolderPair(INF, 1.0)
    if p == 1.0:
        return HolderPair(1.0, INF)
    return HolderPair(p, p / (p - 1.0))


def dot(w: Vector, f: Vector) -> float:
    """Inner product, accumulated in ascending index order.

    dense . sparse requires f.dimension <= len(w); dense . dense requires equal
    lengths. sparse . sparse runs a two-pointer merge over the sorted indices.
    """
    if isinstance(w, SparseVector) and isinstance(f, SparseVector):
        return _dot_sparse_sparse(w, f)
    if isinstance(f, SparseVector):
        if f.dimension > len(w):
            raise DimensionMismatch(f"sparse dim {f.dimension} exceeds dense length {len(w)}")
        total = 0.0
        for i, v in f.entries:
            total += w[i] * v
        return float(total)
    if isinstance(w, SparseVector):
        return dot(f, w)
    if len(w) != len(f):
        raise DimensionMismatch(f"dense lengths differ: {len(w)} vs {len(f)}")
    total = 0.0
    for a, b in zip(w, f):
        total += a * b
    return float(total)


def _dot_sparse_sparse(a: SparseVector, b: SparseVector) -> float:
    total = 0.0
    i = j = 0
    ea, eb = a.entries, b.entries
    while i < len(ea) and j < len(eb):
        ia, va = ea[i]
        ib, vb = eb[j]
        if ia == ib:
            total += va * vb
            i += 1
            j += 1
        elif ia < ib:
            i += 1
        else:
            j += 1
    return total


def norm(v: Vector, p: float) -> float:
    """lp norm; p = inf returns the max absolute component."""
    if not (p >= 1.0):
        raise ValueError(f"p must lie in [1, inf], got {p}")
    if isinstance(v, SparseVector):
        vals = np.asarray([x for _, x in v.entries], dtype=np.float64)
    else:
        vals = np.asarray(v, dtype=np.float64)
    if vals.size == 0:
        return 0.0
    a = np.abs(vals)
    if p == INF:
        return float(a.max())
    if p == 1.0:
        return float(a.sum())
    if p == 2.0:
        return float(math.sqrt(float((a * a).sum())))
    return float(float((a**p).sum()) ** (1.0 / p))
