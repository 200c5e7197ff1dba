"""Closed-form norm bounds checked against the dense oracle"""

import math

import numpy as np
import pytest

from lib.errors import DimensionMismatch, DomainError, NotOverlapping
from lib.linalg import frobenius_norm, norm_2_1, spectral_norm_dense_oracle, symmetric_eigenvalues
from lib.lowering import gamma_depthwise, gamma_pointwise, gamma_standard, omega, plan_1d, plan_2d
from lib.norm_bounds import (
    bound_21_conv,
    bound_21_fc,
    bound_depthwise_nonoverlap,
    bound_depthwise_overlap,
    bound_standard,
    exact_depthwise_nonoverlap,
    gamma_f_norm_standard,
    spectral_pointwise,
    toeplitz_eig_bound,
    toeplitz_matrix,
    toeplitz_sequence,
)
from lib.prng import SplitMix64
from lib.types import ConvWeight, ToeplitzSpec

SLACK = 1 + 1e-10


class TestStandardBound:
    def test_dominates_oracle(self):
        rng = SplitMix64(21)
        for _ in range(100):
            length = rng.integer(2, 13)
            k = rng.integer(1, length + 1)
            plan = plan_1d(length, k, rng.integer(1, 4))
            W = ConvWeight.standard(rng.matrix(rng.integer(1, 5), k))
            exact = spectral_norm_dense_oracle(gamma_standard(W, plan))
            assert exact <= bound_standard(W, plan.m) * SLACK

    def test_frobenius_of_gamma_is_exact(self, rng):
        plan = plan_2d(4, 5, 2, 3, 1)
        W = ConvWeight.standard(rng.standard_normal((3, 6)), k=(2, 3))
        assert gamma_f_norm_standard(W, plan.m) == pytest.approx(frobenius_norm(gamma_standard(W, plan)))

    def test_rejects_zero_m(self):
        with pytest.raises(DomainError):
            bound_standard(ConvWeight.standard([[1.0]]), 0)


class TestDepthwiseBounds:
    """Disjoint windows give the exact norm; any stride is covered by the l1 bound"""

    def test_nonoverlap_exact(self):
        rng = SplitMix64(22)
        for _ in range(100):
            k = rng.integer(1, 5)
            plan = plan_1d(k * rng.integer(1, 5), k, k)
            W = ConvWeight.depthwise(rng.matrix(rng.integer(1, 4), k))
            exact = spectral_norm_dense_oracle(gamma_depthwise(W, plan))
            assert exact_depthwise_nonoverlap(W) == pytest.approx(exact, rel=1e-10)
            assert exact <= bound_depthwise_nonoverlap(W) * SLACK

    def test_overlap_bound(self):
        rng = SplitMix64(23)
        for _ in range(100):
            k = rng.integer(2, 6)
            plan = plan_1d(rng.integer(k, k + 10), k, rng.integer(1, k + 2))
            W = ConvWeight.depthwise(rng.matrix(rng.integer(1, 4), k))
            assert spectral_norm_dense_oracle(gamma_depthwise(W, plan)) <= bound_depthwise_overlap(W) * SLACK

    def test_overlap_bound_is_largest_l1(self):
        W = ConvWeight.depthwise([[1.0, -2.0], [0.5, 0.5]])
        assert bound_depthwise_overlap(W) == 3.0

    def test_nonoverlap_values(self):
        W = ConvWeight.depthwise([[3.0, 4.0], [0.0, 1.0]])
        assert exact_depthwise_nonoverlap(W) == pytest.approx(5.0)
        assert bound_depthwise_nonoverlap(W) == pytest.approx(math.sqrt(26.0))

    def test_requires_depthwise(self):
        with pytest.raises(DimensionMismatch):
            bound_depthwise_overlap(ConvWeight.standard([[1.0, 2.0]]))


class TestPointwise:
    def test_equals_lowered_norm(self):
        rng = SplitMix64(24)
        for _ in range(50):
            W = ConvWeight.pointwise(rng.matrix(rng.integer(1, 6), rng.integer(1, 6)))
            lowered = spectral_norm_dense_oracle(gamma_pointwise(W, rng.integer(1, 5)))
            assert spectral_pointwise(W) == pytest.approx(lowered, rel=1e-10)

    def test_requires_pointwise(self):
        with pytest.raises(DimensionMismatch):
            spectral_pointwise(ConvWeight.depthwise([[1.0]]))


class TestToeplitz:
    """Banded structure of Omega(w) Omega(w)^T"""

    def test_sequence_values(self):
        spec = toeplitz_sequence([1.0, 2.0, 3.0], 1)
        assert spec.band == 3
        assert spec.t == (14.0, 8.0, 3.0, 0.0)
        assert toeplitz_eig_bound(spec) == 36.0

    def test_stride_two(self):
        spec = toeplitz_sequence([1.0, 2.0, 3.0], 2)
        assert spec.band == 2
        assert spec.t == (14.0, 3.0, 0.0)

    def test_nonoverlapping_rejected(self):
        with pytest.raises(NotOverlapping):
            toeplitz_sequence([1.0, 2.0], 2)

    def test_matches_gram(self):
        rng = SplitMix64(25)
        for _ in range(100):
            k = rng.integer(2, 6)
            l = rng.integer(1, k)
            plan = plan_1d(rng.integer(k, k + 12), k, l)
            w = rng.normal(k)
            Omega = omega(w, plan)
            expected = toeplitz_matrix(toeplitz_sequence(w, l), plan.m)
            np.testing.assert_allclose(Omega @ Omega.T, expected, atol=1e-12)

    def test_eig_bound_dominates(self):
        rng = SplitMix64(26)
        for _ in range(100):
            k = rng.integer(2, 6)
            l = rng.integer(1, k)
            spec = toeplitz_sequence(rng.normal(k), l)
            T = toeplitz_matrix(spec, rng.integer(1, 15))
            top = float(np.max(np.abs(symmetric_eigenvalues(T))))
            assert top <= toeplitz_eig_bound(spec) * SLACK

    def test_matrix_small_n_truncates_band(self):
        T = toeplitz_matrix(ToeplitzSpec((2.0, 1.0, 1.0), 2), 2)
        np.testing.assert_array_equal(T, [[2.0, 1.0], [1.0, 2.0]])

    def test_matrix_is_banded(self):
        T = toeplitz_matrix(ToeplitzSpec((4.0, 2.0, 1.0, 0.0), 3), 6)
        np.testing.assert_array_equal(T, T.T)
        np.testing.assert_array_equal(np.diag(T, 2), np.ones(4))
        assert not np.any(np.triu(T, 3))

    def test_bad_sequence_length(self):
        with pytest.raises(DomainError):
            ToeplitzSpec((1.0, 2.0), 2)


class TestTwoOneNorms:
    def test_fc_bound(self):
        assert bound_21_fc(2.0, 4) == 4.0

    def test_conv_bound(self):
        assert bound_21_conv(1.0, 3, 4) == 6.0

    def test_negative_a(self):
        with pytest.raises(DomainError):
            bound_21_fc(-1.0, 2)

    def test_fc_dominates(self, rng):
        A = rng.standard_normal((5, 7))
        assert norm_2_1(A) <= bound_21_fc(frobenius_norm(A), 5) * SLACK

    def test_conv_dominates(self):
        rng = SplitMix64(27)
        for _ in range(50):
            length = rng.integer(3, 12)
            k = rng.integer(1, 4)
            plan = plan_1d(length, k, rng.integer(1, 3))
            W = ConvWeight.standard(rng.matrix(rng.integer(1, 5), k))
            C = gamma_standard(W, plan)
            assert norm_2_1(C) <= bound_21_conv(frobenius_norm(W.filters), plan.m, W.c) * SLACK
