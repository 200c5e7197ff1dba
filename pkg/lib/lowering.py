"""Lowering of convolutions to fully connected matrices

Index sets are 1-based and inputs are flattened channel-blocked: all spatial
positions of channel 1, then channel 2, and so on. Only valid (unpadded)
convolutions are expressible.
"""

from typing import Sequence

import numpy as np

from lib.errors import DimensionMismatch, DomainError, FilterLargerThanInput, NotSquare
from lib.linalg import as_matrix
from lib.types import ConvKind, ConvWeight, DenseMatrix, IndexSet, LoweringPlan

POINTWISE_LAYOUTS = ('channel_blocked', 'position_major')


# ===== PLANS =====

def _window_starts(size: int, k: int, stride: int) -> range:
    return range(0, size - k + 1, stride)


def plan_conv(
    spatial: Sequence[int],
    kernel: Sequence[int],
    stride: int = 1,
    channels: int = 1
) -> LoweringPlan:
    """Index sets of a valid 1-D or 2-D convolution over ``channels`` input channels

    Window positions are traversed row-major; inside a window the entries run
    channel by channel, row-major within each channel.

    Args:
        spatial: Input spatial shape, (length,) or (h, w)
        kernel: Filter spatial shape, same rank as ``spatial``
        stride: Step between windows on every axis
        channels: Input channels read by each filter

    Returns:
        LoweringPlan with filter_dim = channels * prod(kernel)
    """
    spatial = tuple(int(v) for v in spatial)
    kernel = tuple(int(v) for v in kernel)
    if len(spatial) not in (1, 2) or len(kernel) != len(spatial):
        raise DimensionMismatch(f"kernel {kernel} and input {spatial} must both be 1-D or 2-D")
    if stride < 1 or channels < 1 or min(kernel) < 1 or min(spatial) < 1:
        raise DomainError("sizes, stride and channels must be positive")
    for size, k in zip(spatial, kernel):
        if k > size:
            raise FilterLargerThanInput(f"filter {kernel} does not fit input {spatial}")

    if len(spatial) == 1:
        spatial, kernel = (1,) + spatial, (1,) + kernel
    h, w = spatial
    kh, kw = kernel
    plane = h * w

    window = np.array([i * w + j for i in range(kh) for j in range(kw)], dtype=np.intp)
    window = (np.arange(channels)[:, None] * plane + window[None, :]).ravel()
    starts = [a * w + b for a in _window_starts(h, kh, stride) for b in _window_starts(w, kw, stride)]

    sets = tuple(IndexSet(tuple(int(i) + start + 1 for i in window)) for start in starts)
    return LoweringPlan(channels * plane, window.size, sets, stride)


def plan_1d(input_len: int, k: int, stride: int = 1) -> LoweringPlan:
    """S_j = (l(j-1)+1, ..., l(j-1)+k) for j = 1..floor((input_len-k)/l)+1"""
    if k > input_len:
        raise FilterLargerThanInput(f"filter length {k} exceeds input length {input_len}")
    return plan_conv((input_len,), (k,), stride)


def plan_2d(h: int, w: int, kh: int, kw: int, stride: int = 1) -> LoweringPlan:
    return plan_conv((h, w), (kh, kw), stride)


def custom_plan(input_dim: int, sets: Sequence[Sequence[int]], stride: int = 1) -> LoweringPlan:
    """Plan from explicit 1-based index sets"""
    sets = tuple(IndexSet(tuple(int(i) for i in s)) for s in sets)
    if not sets:
        raise DomainError("a lowering plan needs at least one index set")
    return LoweringPlan(input_dim, len(sets[0]), sets, stride)


# ===== STANDARD CONVOLUTION =====

def _check_filter_dim(W: ConvWeight, plan: LoweringPlan):
    if W.filter_dim != plan.filter_dim:
        raise DimensionMismatch(
            f"filters have {W.filter_dim} entries but the plan selects {plan.filter_dim}"
        )


def _scatter(filters: np.ndarray, plan: LoweringPlan) -> np.ndarray:
    """(c, m, d_input) array whose [i, j] row holds filter i at positions S_j"""
    c = filters.shape[0]
    idx = plan.index_array
    out = np.zeros((c, plan.m, plan.input_dim))
    out[:, np.arange(plan.m)[:, None], idx] = filters[:, None, :]
    return out


def gamma_standard(W: ConvWeight, plan: LoweringPlan) -> DenseMatrix:
    """Fully connected matrix of a convolution, rows filter-major

    Row (i-1)m + j holds w^i at the columns of S_j and zeros elsewhere.
    """
    _check_filter_dim(W, plan)
    return _scatter(W.filters, plan).reshape(W.c * plan.m, plan.input_dim)


def _as_input(Z, rows: int) -> DenseMatrix:
    Z = as_matrix(Z)
    if Z.shape[0] != rows:
        raise DimensionMismatch(f"input has {Z.shape[0]} rows, expected {rows}")
    return Z


def mu_direct(W: ConvWeight, plan: LoweringPlan, Z) -> DenseMatrix:
    """Convolution by gathering each window and taking dot products"""
    _check_filter_dim(W, plan)
    Z = _as_input(Z, plan.input_dim)
    windows = Z[plan.index_array]  # (m, r, n)
    out = np.einsum('cr,mrn->cmn', W.filters, windows)
    return out.reshape(W.c * plan.m, Z.shape[1])


# ===== DEPTHWISE CONVOLUTION =====

def _check_depthwise(W: ConvWeight, plan: LoweringPlan):
    if W.kind is not ConvKind.DEPTHWISE:
        raise DimensionMismatch(f"expected a depthwise weight, got {W.kind.value}")
    _check_filter_dim(W, plan)


def omega(w: Sequence[float], plan: LoweringPlan) -> DenseMatrix:
    """Rows w_{S_1}, ..., w_{S_m} of a single-channel filter"""
    return gamma_standard(ConvWeight.depthwise([list(w)], k=plan.filter_dim), plan)


def gamma_depthwise(W: ConvWeight, plan: LoweringPlan) -> DenseMatrix:
    """Block-diagonal matrix of Omega(w^i), one block per channel

    ``plan`` covers one channel's spatial positions.
    """
    _check_depthwise(W, plan)
    c, m_in, m_out = W.c, plan.input_dim, plan.m
    blocks = _scatter(W.filters, plan)
    out = np.zeros((c, m_out, c, m_in))
    channel = np.arange(c)
    out[channel, :, channel, :] = blocks
    return out.reshape(c * m_out, c * m_in)


def mu_depthwise(W: ConvWeight, plan: LoweringPlan, Z) -> DenseMatrix:
    _check_depthwise(W, plan)
    Z = _as_input(Z, W.c * plan.input_dim)
    per_channel = Z.reshape(W.c, plan.input_dim, Z.shape[1])
    windows = per_channel[:, plan.index_array, :]  # (c, m', k, n)
    out = np.einsum('ck,cjkn->cjn', W.filters, windows)
    return out.reshape(W.c * plan.m, Z.shape[1])


# ===== POINTWISE CONVOLUTION =====

def _check_pointwise(W: ConvWeight, m: int):
    if W.kind is not ConvKind.POINTWISE:
        raise DimensionMismatch(f"expected a pointwise weight, got {W.kind.value}")
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")


def gamma_pointwise(W: ConvWeight, m: int, layout: str = 'channel_blocked') -> DenseMatrix:
    """Fully connected matrix of a 1x1 convolution over m spatial positions

    ``channel_blocked`` matches how the network model flattens activations:
    output row (i, p) reads input column (j, p) with weight W_ij. The
    ``position_major`` layout stacks Phi(w^i) = I_m (x) w^i instead. Both give
    gamma gamma^T = Theta(W W^T, m).
    """
    _check_pointwise(W, m)
    if layout == 'channel_blocked':
        return np.kron(W.filters, np.eye(m))
    if layout == 'position_major':
        return np.vstack([np.kron(np.eye(m), W.filters[i:i + 1]) for i in range(W.c)])
    raise DomainError(f"unknown pointwise layout '{layout}', expected one of {POINTWISE_LAYOUTS}")


def mu_pointwise(W: ConvWeight, m: int, Z) -> DenseMatrix:
    _check_pointwise(W, m)
    Z = _as_input(Z, W.channels_in * m)
    per_channel = Z.reshape(W.channels_in, m, Z.shape[1])
    out = np.einsum('oc,cmn->omn', W.filters, per_channel)
    return out.reshape(W.c * m, Z.shape[1])


def theta(V, m: int) -> DenseMatrix:
    """Block matrix whose (i, j) block is V_ij * I_m"""
    V = as_matrix(V)
    if V.shape[0] != V.shape[1]:
        raise NotSquare(f"theta needs a square matrix, got {V.shape[0]}x{V.shape[1]}")
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    return np.kron(V, np.eye(m))
