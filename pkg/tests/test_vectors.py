import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from classview.vectors import (
    DimensionMismatch,
    HolderPair,
    SparseVector,
    conjugate,
    dense,
    dot,
    norm,
)

INF = math.inf


def sv(pairs, dim):
    return SparseVector(pairs, dim)


class TestSparseVector:
    def test_rejects_unsorted_indices(self):
        with pytest.raises(ValueError):
            sv([(3, 1.0), (1, 2.0)], 5)

    def test_rejects_duplicate_indices(self):
        with pytest.raises(ValueError):
            sv([(1, 1.0), (1, 2.0)], 5)

    def test_rejects_explicit_zero(self):
        with pytest.raises(ValueError):
            sv([(0, 0.0)], 2)

    def test_rejects_out_of_range_index(self):
        with pytest.raises(ValueError):
            sv([(5, 1.0)], 5)

    def test_from_dict_sorts_and_drops_zeros(self):
        v = SparseVector.from_dict({4: 2.0, 1: -1.0, 3: 0.0}, 6)
        assert v.entries == [(1, -1.0), (4, 2.0)]

    def test_to_dense_round_trip(self):
        v = sv([(0, 3.0), (2, -1.0)], 4)
        assert np.array_equal(v.to_dense(), [3.0, 0.0, -1.0, 0.0])


class TestDot:
    def test_worked_two_dim_example(self):
        # w = (-1, 1) against the point (3, 4): -3 + 4
        assert dot(dense([-1.0, 1.0]), sv([(0, 3.0), (1, 4.0)], 2)) == 1.0

    def test_empty_sparse_is_zero(self):
        assert dot(dense([5.0, 7.0]), sv([], 2)) == 0.0

    def test_hand_arithmetic(self):
        assert dot(dense([2.0, 0.0, -1.0]), sv([(0, 1.0), (2, 4.0)], 3)) == -2.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            dot(dense([1.0]), sv([(1, 1.0)], 3))

    def test_dense_dense(self):
        assert dot(dense([1.0, 2.0]), dense([3.0, 4.0])) == 11.0
        with pytest.raises(DimensionMismatch):
            dot(dense([1.0]), dense([1.0, 2.0]))

    def test_sparse_sparse_merge(self):
        a = sv([(0, 1.0), (2, 2.0), (5, 3.0)], 6)
        b = sv([(2, 4.0), (4, 9.0), (5, -1.0)], 6)
        assert dot(a, b) == 2.0 * 4.0 + 3.0 * -1.0

    def test_ascending_order_accumulation(self):
        # fixed summation order: ((w0*v0 + w1*v1) + w2*v2), bit for bit
        w = dense([0.1, 0.2, 0.3])
        f = sv([(0, 1.0), (1, 1.0), (2, 1.0)], 3)
        assert dot(w, f) == ((0.1 * 1.0 + 0.2 * 1.0) + 0.3 * 1.0)

    @given(
        st.lists(st.floats(-10, 10), min_size=1, max_size=8),
        st.floats(-100, 100),
    )
    @settings(max_examples=200, deadline=None)
    def test_bilinear_in_second_argument(self, vals, a):
        dim = len(vals)
        w = dense(range(1, dim + 1))
        f = SparseVector.from_dict({i: v for i, v in enumerate(vals)}, dim)
        lhs = dot(w, f.scale(a))
        rhs = a * dot(w, f)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


class TestNorm:
    def test_triangle(self):
        assert norm(dense([3.0, 4.0]), 2) == 5.0

    def test_l1(self):
        assert norm(dense([-1.0, 1.0]), 1) == 2.0

    def test_inf_is_max_abs(self):
        assert norm(dense([3.0, -7.0, 2.0]), INF) == 7.0

    def test_sparse_matches_dense(self):
        v = sv([(1, -2.0), (4, 3.0)], 6)
        for p in (1, 1.5, 2, 3, INF):
            assert norm(v, p) == pytest.approx(norm(v.to_dense(), p), rel=1e-12)

    def test_rejects_p_below_one(self):
        with pytest.raises(ValueError):
            norm(dense([1.0]), 0.5)

    def test_zero_iff_zero_vector(self):
        assert norm(sv([], 3), 2) == 0.0
        assert norm(dense([0.0, 0.0]), 1) == 0.0
        assert norm(sv([(0, 1e-300)], 1), INF) > 0.0


class TestConjugate:
    def test_inf_pairs_with_one(self):
        assert conjugate(INF) == HolderPair(INF, 1.0)

    def test_two_is_self_conjugate(self):
        assert conjugate(2.0) == HolderPair(2.0, 2.0)

    def test_four_thirds(self):
        assert conjugate(4.0 / 3.0).q == pytest.approx(4.0, rel=1e-12)

    def test_rejects_p_below_one(self):
        with pytest.raises(ValueError):
            conjugate(0.99)

    def test_pair_validation(self):
        with pytest.raises(ValueError):
            HolderPair(2.0, 3.0)


def test_holder_inequality_fuzz():
    # |<x, y>| <= ||x||_p * ||y||_q over random vectors and exponents
    rng = np.random.default_rng(42)
    ps = [1.0, 4.0 / 3.0, 1.5, 2.0, 3.0, 4.0, INF]
    violations = 0
    for k in range(100_000):
        dim = int(rng.integers(1, 12))
        nnz = int(rng.integers(0, dim + 1))
        idx = sorted(rng.choice(dim, size=nnz, replace=False).tolist())
        vals = rng.uniform(-5, 5, size=nnz)
        f = SparseVector([(i, v) for i, v in zip(idx, vals) if v != 0.0], dim)
        w = rng.uniform(-5, 5, size=dim)
        p = ps[k % len(ps)]
        pair = conjugate(p)
        lhs = abs(dot(w, f))
        rhs = norm(w, pair.p) * norm(f, pair.q)
        if lhs > rhs * (1 + 1e-9):
            violations += 1
    assert violations == 0
