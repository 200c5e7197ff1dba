"""Closed-form norm bounds for lowered convolutions and the banded Toeplitz tools"""

import math
from typing import Sequence

import numpy as np
import scipy.linalg

from lib.errors import DimensionMismatch, DomainError, NotOverlapping
from lib.linalg import frobenius_norm, norm_inf_row_l1, spectral_norm_exact
from lib.types import ConvKind, ConvWeight, DenseMatrix, ToeplitzSpec


def _require(W: ConvWeight, kind: ConvKind):
    if W.kind is not kind:
        raise DimensionMismatch(f"expected a {kind.value} weight, got {W.kind.value}")


def _require_m(m: int):
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")


def _require_nonnegative(a: float):
    if not a >= 0:
        raise DomainError(f"norm bound a must be >= 0, got {a}")


# ===== SPECTRAL NORMS =====

def bound_standard(W: ConvWeight, m: int) -> float:
    """sqrt(m) ||W||_F, an upper bound on ||gamma(W)||_sigma"""
    _require_m(m)
    return math.sqrt(m) * frobenius_norm(W.filters)


def exact_depthwise_nonoverlap(W: ConvWeight) -> float:
    """max_i ||w^i||_2, the spectral norm of gamma(W) when windows are disjoint"""
    _require(W, ConvKind.DEPTHWISE)
    return float(np.max(np.sqrt(np.sum(W.filters * W.filters, axis=1))))


def bound_depthwise_nonoverlap(W: ConvWeight) -> float:
    _require(W, ConvKind.DEPTHWISE)
    return frobenius_norm(W.filters)


def bound_depthwise_overlap(W: ConvWeight) -> float:
    """||W||_inf (largest filter l1 norm); holds for any stride"""
    _require(W, ConvKind.DEPTHWISE)
    return norm_inf_row_l1(W.filters)


def spectral_pointwise(W: ConvWeight) -> float:
    """||W||_sigma of the c' x c matrix, equal to ||gamma(W)||_sigma"""
    _require(W, ConvKind.POINTWISE)
    return spectral_norm_exact(W.filters)


# ===== TOEPLITZ =====

def toeplitz_sequence(w: Sequence[float], l: int) -> ToeplitzSpec:
    """Generating sequence of Omega(w) Omega(w)^T for a 1-D filter w at stride l

    t_s = sum_{j=1}^{k-s*l} w_{s*l+j} w_j for s = 0..ceil(k/l); empty sums are 0.

    Raises:
        NotOverlapping: l >= k, so the product is diagonal
    """
    w = np.asarray(w, dtype=np.float64).ravel()
    k = w.size
    if l < 1 or k < 1:
        raise DomainError(f"need k >= 1 and stride >= 1, got k={k}, l={l}")
    if l >= k:
        raise NotOverlapping(f"stride {l} >= filter length {k}: windows do not overlap")
    band = math.ceil(k / l)
    t = []
    for s in range(band + 1):
        shift = s * l
        t.append(float(np.dot(w[shift:], w[:k - shift])) if shift < k else 0.0)
    return ToeplitzSpec(tuple(t), band)


def toeplitz_eig_bound(spec: ToeplitzSpec) -> float:
    """sum_{i=-b}^{b} |t_|i||, which dominates every eigenvalue"""
    t = np.abs(np.asarray(spec.t))
    return float(t[0] + 2.0 * np.sum(t[1:]))


def toeplitz_matrix(spec: ToeplitzSpec, n: int) -> DenseMatrix:
    """Materialized n x n symmetric banded Toeplitz matrix"""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    first = np.zeros(n)
    band = min(n, len(spec.t))
    first[:band] = spec.t[:band]
    return scipy.linalg.toeplitz(first)


# ===== 2,1 AND FROBENIUS NORMS =====

def bound_21_fc(a: float, d_out: int) -> float:
    _require_nonnegative(a)
    return a * math.sqrt(d_out)


def bound_21_conv(a: float, m: int, c: int) -> float:
    """a m sqrt(c): 2,1-norm bound of a lowered conv with c filters and m outputs each"""
    _require_nonnegative(a)
    _require_m(m)
    return a * m * math.sqrt(c)


def gamma_f_norm_standard(W: ConvWeight, m: int) -> float:
    """sqrt(m) ||W||_F, the exact Frobenius norm of gamma(W)"""
    _require_m(m)
    return math.sqrt(m) * frobenius_norm(W.filters)
