"""Dense matrix norms and the two spectral-norm engines

``spectral_norm_power`` is the workhorse; ``spectral_norm_dense_oracle`` is a
brute-force Jacobi eigensolver used to check it and every closed-form bound.
"""

import logging
import math
from typing import List, Tuple

import numpy as np

from lib import config
from lib.errors import DimensionMismatch, DomainError, NotSquare, NotSymmetric, OracleTooLarge
from lib.prng import LCG64
from lib.types import DenseMatrix, SpectralResult

logger = logging.getLogger(__name__)

POWER_TOL = 1e-10
POWER_MAX_ITER = 10000
POWER_SEED = 0x5EED
JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100
SYMMETRY_TOL = 1e-12
EXACT_TOL = 1e-13
DIRECT_ORACLE_SIZE = 64


def as_matrix(M) -> DenseMatrix:
    """Validate M as a finite, non-empty 2-D float64 matrix

    Args:
        M: Anything numpy can turn into a 2-D array (1-D input becomes one row)

    Returns:
        The float64 ndarray (no copy when M already is one)
    """
    A = np.asarray(M, dtype=np.float64)
    if A.ndim < 2:
        A = A.reshape(1, -1)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise DimensionMismatch(f"expected a non-empty 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError("matrix contains NaN or infinite entries")
    return A


def frobenius_norm(M) -> float:
    A = as_matrix(M)
    return float(np.sqrt(np.sum(A * A)))


def norm_2_1(M) -> float:
    """Sum over rows of the row l2 norms"""
    A = as_matrix(M)
    return float(np.sum(np.sqrt(np.sum(A * A, axis=1))))


def norm_inf_row_l1(M) -> float:
    """Largest row l1 norm (the induced infinity norm)"""
    A = as_matrix(M)
    return float(np.max(np.sum(np.abs(A), axis=1)))


def spectral_norm_power(
    M,
    tol: float = POWER_TOL,
    max_iter: int = POWER_MAX_ITER,
    seed: int = POWER_SEED
) -> SpectralResult:
    """Largest singular value by power iteration on M^T M

    Args:
        M: Matrix
        tol: Relative change in the Rayleigh estimate that counts as converged
        max_iter: Sweep limit
        seed: Seed of the LCG that draws the start vector

    Returns:
        SpectralResult; ``converged`` is False when the sweep limit was hit
    """
    A = as_matrix(M)
    if not tol > 0:
        raise DomainError(f"tol must be > 0, got {tol}")
    if max_iter < 1:
        raise DomainError(f"max_iter must be >= 1, got {max_iter}")

    v = 2.0 * LCG64(seed).uniform(A.shape[1]) - 1.0
    norm = np.linalg.norm(v)
    v = v / norm if norm > 0 else np.full(A.shape[1], 1.0 / math.sqrt(A.shape[1]))

    estimate = previous = 0.0
    for iteration in range(1, max_iter + 1):
        w = A.T @ (A @ v)
        estimate = float(v @ w)
        w_norm = float(np.linalg.norm(w))
        if w_norm == 0.0:
            return SpectralResult(0.0, iteration, True)
        if iteration > 1 and abs(estimate - previous) < tol * abs(estimate):
            return SpectralResult(math.sqrt(max(estimate, 0.0)), iteration, True)
        previous = estimate
        v = w / w_norm

    logger.warning(
        "Power iteration stopped after %d sweeps without converging (shape %dx%d)",
        max_iter, A.shape[0], A.shape[1]
    )
    return SpectralResult(math.sqrt(max(estimate, 0.0)), max_iter, False)


# ===== JACOBI ORACLE =====

def _round_robin_pairs(n: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Round-robin schedule: every (p, q) pair once, disjoint pairs per round"""
    size = n + (n % 2)
    players = list(range(size))
    rounds = []
    for _ in range(size - 1):
        pairs = [(players[i], players[size - 1 - i]) for i in range(size // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if max(a, b) < n]
        if pairs:
            p, q = zip(*pairs)
            rounds.append((np.array(p, dtype=np.intp), np.array(q, dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _off_diagonal_norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(A - np.diag(np.diag(A))))


def _jacobi_eigenvalues(S: np.ndarray) -> np.ndarray:
    """Cyclic Jacobi on a symmetric matrix, rotations applied a round at a time"""
    A = np.array(S, dtype=np.float64)
    n = A.shape[0]
    target = JACOBI_TOL * float(np.linalg.norm(A))
    rounds = _round_robin_pairs(n)

    previous_off = math.inf
    for sweep in range(JACOBI_MAX_SWEEPS):
        off = _off_diagonal_norm(A)
        if off <= target:
            break
        if off >= previous_off:
            logger.warning(
                "Jacobi stalled at off-diagonal norm %.3e (target %.3e) after %d sweeps",
                off, target, sweep
            )
            break
        previous_off = off
        for p, q in rounds:
            apq = A[p, q]
            if sweep > 3:
                # below rounding of both diagonal entries
                g = 100.0 * np.abs(apq)
                app, aqq = np.abs(A[p, p]), np.abs(A[q, q])
                negligible = (app + g == app) & (aqq + g == aqq)
                A[p[negligible], q[negligible]] = 0.0
                A[q[negligible], p[negligible]] = 0.0
                apq = np.where(negligible, 0.0, apq)
            active = apq != 0.0
            if not np.any(active):
                continue
            tau = (A[q, q] - A[p, p]) / (2.0 * np.where(active, apq, 1.0))
            t = np.where(tau >= 0.0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c

            row_p = A[p, :].copy()
            row_q = A[q, :].copy()
            A[p, :] = c[:, None] * row_p - s[:, None] * row_q
            A[q, :] = s[:, None] * row_p + c[:, None] * row_q
            col_p = A[:, p].copy()
            col_q = A[:, q].copy()
            A[:, p] = col_p * c - col_q * s
            A[:, q] = col_p * s + col_q * c
            A[p, q] = 0.0
            A[q, p] = 0.0
    else:
        logger.warning(
            "Jacobi reached %d sweeps with off-diagonal norm %.3e (target %.3e)",
            JACOBI_MAX_SWEEPS, _off_diagonal_norm(A), target
        )

    return np.diag(A).copy()


def symmetric_eigenvalues(M) -> np.ndarray:
    """Full spectrum of a symmetric matrix, descending

    Raises:
        NotSquare: M is not square
        NotSymmetric: some |M_ij - M_ji| exceeds 1e-12
    """
    A = as_matrix(M)
    if A.shape[0] != A.shape[1]:
        raise NotSquare(f"expected a square matrix, got {A.shape[0]}x{A.shape[1]}")
    asymmetry = float(np.max(np.abs(A - A.T)))
    if asymmetry > SYMMETRY_TOL:
        raise NotSymmetric(f"matrix is not symmetric (max |M - M^T| = {asymmetry:.3e})")
    eigenvalues = _jacobi_eigenvalues((A + A.T) / 2.0)
    return np.sort(eigenvalues)[::-1]


def spectral_norm_dense_oracle(M) -> float:
    """Brute-force largest singular value via Jacobi on the smaller Gram matrix

    Raises:
        OracleTooLarge: min(rows, cols) exceeds CONVBOUND_ORACLE_CAP
    """
    A = as_matrix(M)
    cap = config.oracle_cap()
    size = min(A.shape)
    if size > cap:
        raise OracleTooLarge(size, cap)
    gram = A @ A.T if A.shape[0] <= A.shape[1] else A.T @ A
    gram = (gram + gram.T) / 2.0
    return math.sqrt(max(float(np.max(_jacobi_eigenvalues(gram))), 0.0))


def spectral_norm_exact(M) -> float:
    """Spectral norm to near machine precision

    Small matrices go straight to the Jacobi oracle; larger ones use a tight
    power iteration and fall back to the oracle if it stalls.
    """
    A = as_matrix(M)
    if min(A.shape) <= DIRECT_ORACLE_SIZE:
        return spectral_norm_dense_oracle(A)
    result = spectral_norm_power(A, tol=EXACT_TOL)
    if result.converged:
        return result.value
    logger.info("Falling back to the dense oracle after %d power sweeps", result.iterations)
    return spectral_norm_dense_oracle(A)
