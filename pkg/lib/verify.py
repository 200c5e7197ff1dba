"""Randomized oracle suite for the lowering operators and every closed-form norm bound"""

import logging
from typing import Callable, List, Optional

import numpy as np

from lib.errors import DomainError
from lib.linalg import (
    frobenius_norm,
    norm_2_1,
    spectral_norm_dense_oracle,
    spectral_norm_power,
    symmetric_eigenvalues,
)
from lib.lowering import (
    gamma_depthwise,
    gamma_pointwise,
    gamma_standard,
    mu_depthwise,
    mu_direct,
    mu_pointwise,
    omega,
    plan_1d,
    plan_conv,
    theta,
)
from lib.network import apply_layer, effective_matrix, layer_norms
from lib.norm_bounds import (
    bound_21_conv,
    bound_21_fc,
    bound_depthwise_nonoverlap,
    bound_depthwise_overlap,
    bound_standard,
    exact_depthwise_nonoverlap,
    spectral_pointwise,
    toeplitz_eig_bound,
    toeplitz_matrix,
    toeplitz_sequence,
)
from lib.prng import SplitMix64, splitmix64
from lib.types import ConvWeight, NetBundle, NormMode, ToeplitzSpec, VerificationResult

logger = logging.getLogger(__name__)

LOWERING_TOL = 1e-13
BOUND_TOL = 1e-10
POWER_CHECK_TOL = 1e-8

Check = Callable[[SplitMix64], float]


def _relative(actual: np.ndarray, expected: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(expected))))
    return float(np.max(np.abs(actual - expected))) / scale


def _excess(value: float, bound: float) -> float:
    """How far value overshoots bound, relative to the bound's size"""
    return max(0.0, value - bound) / max(1.0, bound)


# ===== LOWERING EQUIVALENCE =====

def _check_standard_1d(rng: SplitMix64) -> float:
    c_in, c_out = rng.integer(1, 4), rng.integer(1, 5)
    length = rng.integer(2, 17)
    k = rng.integer(1, min(length, 5) + 1)
    stride = rng.integer(1, 4)
    plan = plan_conv((length,), (k,), stride, c_in)
    W = ConvWeight.standard(rng.matrix(c_out, c_in * k), k=k, channels_in=c_in)
    Z = rng.matrix(plan.input_dim, rng.integer(1, 4))
    return _relative(mu_direct(W, plan, Z), gamma_standard(W, plan) @ Z)


def _check_standard_2d(rng: SplitMix64) -> float:
    h, w = rng.integer(2, 7), rng.integer(2, 7)
    kh, kw = rng.integer(1, h + 1), rng.integer(1, w + 1)
    c_in, c_out = rng.integer(1, 3), rng.integer(1, 4)
    plan = plan_conv((h, w), (kh, kw), rng.integer(1, 3), c_in)
    W = ConvWeight.standard(rng.matrix(c_out, c_in * kh * kw), k=(kh, kw), channels_in=c_in)
    Z = rng.matrix(plan.input_dim, rng.integer(1, 4))
    return _relative(mu_direct(W, plan, Z), gamma_standard(W, plan) @ Z)


def _depthwise_case(rng: SplitMix64, overlap: bool):
    k = rng.integer(2, 6)
    stride = rng.integer(1, k) if overlap else rng.integer(k, k + 3)
    length = rng.integer(k, k + 14)
    c = rng.integer(1, 5)
    plan = plan_1d(length, k, stride)
    return ConvWeight.depthwise(rng.matrix(c, k)), plan


def _check_depthwise(overlap: bool) -> Check:
    def check(rng: SplitMix64) -> float:
        W, plan = _depthwise_case(rng, overlap)
        Z = rng.matrix(W.c * plan.input_dim, rng.integer(1, 4))
        return _relative(mu_depthwise(W, plan, Z), gamma_depthwise(W, plan) @ Z)
    return check


def _check_pointwise(rng: SplitMix64) -> float:
    c, c_out, m = rng.integer(1, 9), rng.integer(1, 9), rng.integer(1, 9)
    W = ConvWeight.pointwise(rng.matrix(c_out, c))
    Z = rng.matrix(c * m, rng.integer(1, 4))
    return _relative(mu_pointwise(W, m, Z), gamma_pointwise(W, m) @ Z)


# ===== NORM BOUNDS =====

def _check_standard_bound(rng: SplitMix64) -> float:
    length = rng.integer(3, 15)
    k = rng.integer(1, min(length, 5) + 1)
    c_in, c_out = rng.integer(1, 3), rng.integer(1, 4)
    plan = plan_conv((length,), (k,), rng.integer(1, 3), c_in)
    W = ConvWeight.standard(rng.matrix(c_out, c_in * k), k=k, channels_in=c_in)
    return _excess(spectral_norm_dense_oracle(gamma_standard(W, plan)), bound_standard(W, plan.m))


def _check_depthwise_nonoverlap(rng: SplitMix64) -> float:
    W, plan = _depthwise_case(rng, overlap=False)
    exact = spectral_norm_dense_oracle(gamma_depthwise(W, plan))
    closed = exact_depthwise_nonoverlap(W)
    return max(abs(exact - closed) / max(1.0, closed), _excess(exact, bound_depthwise_nonoverlap(W)))


def _check_depthwise_overlap(rng: SplitMix64) -> float:
    W, plan = _depthwise_case(rng, overlap=True)
    return _excess(spectral_norm_dense_oracle(gamma_depthwise(W, plan)), bound_depthwise_overlap(W))


def _check_pointwise_equality(rng: SplitMix64) -> float:
    c, c_out, m = rng.integer(1, 9), rng.integer(1, 9), rng.integer(1, 9)
    W = ConvWeight.pointwise(rng.matrix(c_out, c))
    exact = spectral_norm_dense_oracle(gamma_pointwise(W, m))
    small = spectral_pointwise(W)
    return abs(exact - small) / max(1.0, small)


def _check_fc_21(rng: SplitMix64) -> float:
    A = rng.matrix(rng.integer(1, 12), rng.integer(1, 12))
    return _excess(norm_2_1(A), bound_21_fc(frobenius_norm(A), A.shape[0]))


def _check_conv_21(rng: SplitMix64) -> float:
    length = rng.integer(3, 15)
    k = rng.integer(1, min(length, 5) + 1)
    plan = plan_1d(length, k, rng.integer(1, 3))
    W = ConvWeight.standard(rng.matrix(rng.integer(1, 5), k))
    return _excess(norm_2_1(gamma_standard(W, plan)), bound_21_conv(frobenius_norm(W.filters), plan.m, W.c))


# ===== TOEPLITZ AND THETA =====

def _check_toeplitz_structure(rng: SplitMix64) -> float:
    k = rng.integer(2, 9)
    stride = rng.integer(1, k)
    plan = plan_1d(rng.integer(k, k + 21), k, stride)
    w = rng.normal(k)
    O = omega(w, plan)
    return _relative(O @ O.T, toeplitz_matrix(toeplitz_sequence(w, stride), plan.m))


def _check_toeplitz_eig(rng: SplitMix64) -> float:
    band = rng.integer(0, 6)
    spec = ToeplitzSpec(tuple(rng.normal(band + 1)), band)
    T = toeplitz_matrix(spec, rng.integer(1, 21))
    largest = float(np.max(np.abs(symmetric_eigenvalues(T))))
    return _excess(largest, toeplitz_eig_bound(spec))


def _check_theta(rng: SplitMix64) -> float:
    size, m = rng.integer(1, 9), rng.integer(1, 7)
    B = rng.matrix(size, size)
    V = B @ B.T
    spectrum = np.sort(symmetric_eigenvalues(theta(V, m)))
    expected = np.sort(np.repeat(symmetric_eigenvalues(V), m))
    return _relative(spectrum, expected)


def _check_power(rng: SplitMix64) -> float:
    M = rng.matrix(rng.integer(1, 13), rng.integer(1, 13))
    power = spectral_norm_power(M, tol=1e-13, max_iter=100000)
    oracle = spectral_norm_dense_oracle(M)
    return abs(power.value - oracle) / max(oracle, 1e-300)


PROPERTIES = (
    ('lowering_standard_1d', _check_standard_1d, LOWERING_TOL),
    ('lowering_standard_2d', _check_standard_2d, LOWERING_TOL),
    ('lowering_depthwise_overlap', _check_depthwise(overlap=True), LOWERING_TOL),
    ('lowering_depthwise_nonoverlap', _check_depthwise(overlap=False), LOWERING_TOL),
    ('lowering_pointwise', _check_pointwise, LOWERING_TOL),
    ('standard_spectral_bound', _check_standard_bound, BOUND_TOL),
    ('depthwise_nonoverlap_exact', _check_depthwise_nonoverlap, BOUND_TOL),
    ('depthwise_overlap_bound', _check_depthwise_overlap, BOUND_TOL),
    ('pointwise_equality', _check_pointwise_equality, BOUND_TOL),
    ('fc_21_bound', _check_fc_21, BOUND_TOL),
    ('conv_21_bound', _check_conv_21, BOUND_TOL),
    ('toeplitz_structure', _check_toeplitz_structure, LOWERING_TOL),
    ('toeplitz_eig_bound', _check_toeplitz_eig, BOUND_TOL),
    ('theta_similarity', _check_theta, BOUND_TOL),
    ('power_vs_oracle', _check_power, POWER_CHECK_TOL),
)


def check_property(name: str, check: Check, trials: int, tolerance: float, seed: int) -> VerificationResult:
    """Run one property ``trials`` times; an error above ``tolerance`` is a violation"""
    rng = SplitMix64(seed)
    errors = [check(rng) for _ in range(trials)]
    violations = sum(1 for e in errors if not e <= tolerance)
    result = VerificationResult(name, trials, violations, max(errors, default=0.0), tolerance)
    if result.passed:
        logger.info("%s: %d trials passed (max error %.3e)", name, trials, result.max_error)
    else:
        logger.warning("%s: %d of %d trials violated tolerance %.1e (max error %.3e)",
                       name, violations, trials, tolerance, result.max_error)
    return result


def check_bundle_layers(bundle: NetBundle, seed: int) -> VerificationResult:
    """Per layer of a bundle: direct operator equals effective matrix, exact s within the bounded s"""
    rng = SplitMix64(seed)
    errors = []
    for layer, W in zip(bundle.spec.layers, bundle.weights):
        Z = rng.matrix(layer.d_in, 2)
        errors.append(_relative(apply_layer(layer, W, Z), effective_matrix(layer, W) @ Z))
        exact = layer_norms(layer, W, NormMode.EXACT)
        bounded = layer_norms(layer, W, NormMode.BOUNDED)
        errors.append(_excess(exact.s, bounded.s))
        errors.append(_excess(exact.n21, bounded.n21))
    violations = sum(1 for e in errors if not e <= BOUND_TOL)
    result = VerificationResult('bundle_layers', bundle.spec.L, violations, max(errors, default=0.0), BOUND_TOL)
    if not result.passed:
        logger.warning("bundle_layers: %d checks violated (max error %.3e)", violations, result.max_error)
    return result


def run_suite(trials: int = 200, seed: int = 0, bundle: Optional[NetBundle] = None) -> List[VerificationResult]:
    """Every property, each on its own seeded stream, plus the bundle's layers when given

    Args:
        trials: Random instances per property
        seed: Root seed; property i draws from SplitMix64(splitmix64(seed) ^ i)
        bundle: Optional network whose layers are checked too

    Returns:
        One VerificationResult per property
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    root = splitmix64(seed)
    results = [
        check_property(name, check, trials, tolerance, root ^ i)
        for i, (name, check, tolerance) in enumerate(PROPERTIES)
    ]
    if bundle is not None:
        results.append(check_bundle_layers(bundle, root ^ len(PROPERTIES)))
    return results


def greedy_cover_count(points, eps: float) -> int:
    """Size of a greedy eps-cover of a finite point set (rows are points)

    Centers end up pairwise more than eps apart, so the count never exceeds
    the eps-packing number of the set.
    """
    if not eps > 0:
        raise DomainError(f"eps must be > 0, got {eps}")
    P = np.asarray(points, dtype=np.float64)
    if P.ndim == 1:
        P = P.reshape(-1, 1)
    uncovered = np.ones(P.shape[0], dtype=bool)
    count = 0
    while np.any(uncovered):
        center = P[np.argmax(uncovered)]
        uncovered &= np.linalg.norm(P - center, axis=1) > eps
        count += 1
    return count
