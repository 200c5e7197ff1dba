"""Network description, validation, forward pass and per-layer norm extraction"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from lib import config
from lib.errors import ConvBoundError, DimensionMismatch, InvalidNetwork, OracleTooLarge
from lib.linalg import as_matrix, frobenius_norm, norm_2_1, spectral_norm_exact
from lib.lowering import (
    gamma_depthwise,
    gamma_pointwise,
    gamma_standard,
    mu_depthwise,
    mu_direct,
    mu_pointwise,
    plan_conv,
)
from lib.norm_bounds import (
    bound_21_conv,
    bound_21_fc,
    bound_depthwise_nonoverlap,
    bound_depthwise_overlap,
    bound_standard,
    exact_depthwise_nonoverlap,
    gamma_f_norm_standard,
    spectral_pointwise,
)
from lib.types import (
    Activation,
    ConvWeight,
    DenseMatrix,
    LayerKind,
    LayerNorms,
    LayerSpec,
    LoweringPlan,
    NetworkSpec,
    NormMode,
)

logger = logging.getLogger(__name__)


# ===== LAYER GEOMETRY =====

def layer_plan(layer: LayerSpec) -> LoweringPlan:
    """Index sets of a standard or depthwise layer

    Standard plans read every input channel; depthwise plans cover one
    channel's spatial positions.
    """
    if layer.kind is LayerKind.STANDARD_CONV:
        return plan_conv(layer.input_spatial, layer.k, layer.stride, layer.c_in)
    if layer.kind is LayerKind.DEPTHWISE_CONV:
        return plan_conv(layer.input_spatial, layer.k, layer.stride, 1)
    raise DimensionMismatch(f"{layer.kind.value} layers have no sliding-window plan")


def outputs_per_filter(layer: LayerSpec) -> int:
    """m_i, the number of outputs each filter produces (1 for FC layers)"""
    if layer.kind is LayerKind.FULLY_CONNECTED:
        return 1
    if layer.kind is LayerKind.POINTWISE_CONV:
        return int(np.prod(layer.input_spatial))
    return layer_plan(layer).m


def weight_shape(layer: LayerSpec) -> Tuple[int, int]:
    window = int(np.prod(layer.k)) if layer.k else 1
    if layer.kind is LayerKind.FULLY_CONNECTED:
        return layer.d_out, layer.d_in
    if layer.kind is LayerKind.STANDARD_CONV:
        return layer.c_out, layer.c_in * window
    if layer.kind is LayerKind.DEPTHWISE_CONV:
        return layer.c_in, window
    return layer.c_out, layer.c_in


def conv_weight(layer: LayerSpec, weight) -> ConvWeight:
    if layer.kind is LayerKind.STANDARD_CONV:
        return ConvWeight.standard(weight, k=layer.k, channels_in=layer.c_in)
    if layer.kind is LayerKind.DEPTHWISE_CONV:
        return ConvWeight.depthwise(weight, k=layer.k)
    if layer.kind is LayerKind.POINTWISE_CONV:
        return ConvWeight.pointwise(weight)
    raise DimensionMismatch("fully connected layers have no conv weight")


def filter_count(layer: LayerSpec) -> int:
    """c_i: number of filters (rows of W_i); d_out for FC layers"""
    return weight_shape(layer)[0]


def _check_weight(layer: LayerSpec, weight, index: Optional[int] = None) -> DenseMatrix:
    W = as_matrix(weight)
    expected = weight_shape(layer)
    if W.shape != expected:
        where = f"layer {index}: " if index is not None else ""
        raise DimensionMismatch(
            f"{where}weight is {W.shape[0]}x{W.shape[1]}, expected {expected[0]}x{expected[1]}"
        )
    return W


# ===== VALIDATION =====

def _conv_violations(layer: LayerSpec, where: str) -> List[str]:
    issues = []
    if layer.c_in < 1 or layer.c_out < 1:
        return [f"{where}: channels must be positive"]
    spatial = layer.input_spatial
    if layer.c_in * int(np.prod(spatial)) != layer.d_in:
        issues.append(
            f"{where}: d_in {layer.d_in} != c_in {layer.c_in} x spatial {'x'.join(map(str, spatial))}"
        )
        return issues

    if layer.kind is LayerKind.POINTWISE_CONV:
        if layer.k and int(np.prod(layer.k)) != 1:
            issues.append(f"{where}: pointwise layers need k = 1")
        if layer.stride != 1:
            issues.append(f"{where}: pointwise layers need stride 1")
        expected = int(np.prod(spatial)) * layer.c_out
        if layer.d_out != expected:
            issues.append(f"{where}: d_out {layer.d_out} != m x c_out = {expected}")
        return issues

    if not layer.k:
        return issues + [f"{where}: conv layers need a filter size k"]
    if layer.kind is LayerKind.DEPTHWISE_CONV and layer.c_in != layer.c_out:
        issues.append(f"{where}: depthwise layers need c_in = c_out, got {layer.c_in} and {layer.c_out}")
    try:
        m = layer_plan(layer).m
    except ConvBoundError as e:
        return issues + [f"{where}: {e}"]
    expected = m * layer.c_out
    if layer.d_out != expected:
        issues.append(f"{where}: d_out {layer.d_out} != m x c_out = {m} x {layer.c_out} = {expected}")
    return issues


def validate(spec: NetworkSpec) -> List[str]:
    """Check dimension chaining and per-kind invariants

    Args:
        spec: Network to check

    Returns:
        Every violation found, each naming its 1-based layer; empty when valid
    """
    issues = []
    if spec.input_dim < 1:
        issues.append(f"input_dim must be >= 1, got {spec.input_dim}")
    if not spec.layers:
        issues.append("L must be >= 1")
        return issues

    previous = spec.input_dim
    for i, layer in enumerate(spec.layers, start=1):
        where = f"layer {i}"
        if layer.d_in < 1 or layer.d_out < 1:
            issues.append(f"{where}: d_in and d_out must be positive")
            previous = layer.d_out
            continue
        if layer.d_in != previous:
            source = "input_dim" if i == 1 else f"layer {i - 1} d_out"
            issues.append(f"{where}: d_in {layer.d_in} does not match {source} {previous}")
        if layer.stride < 1:
            issues.append(f"{where}: stride must be >= 1")
        if not layer.lipschitz > 0:
            issues.append(f"{where}: lipschitz constant must be positive")
        elif layer.activation is Activation.RELU and layer.lipschitz != 1.0:
            issues.append(f"{where}: relu layers have lipschitz constant 1, got {layer.lipschitz}")
        if layer.kind is LayerKind.FULLY_CONNECTED:
            if layer.k:
                issues.append(f"{where}: fully connected layers take no filter size")
        elif layer.stride >= 1:
            issues.extend(_conv_violations(layer, where))
        previous = layer.d_out
    return issues


def check_network(spec: NetworkSpec, weights: Sequence) -> List[DenseMatrix]:
    """Validate the network spec and every weight shape, returning the weights as matrices"""
    issues = validate(spec)
    if issues:
        raise InvalidNetwork(issues)
    if len(weights) != spec.L:
        raise DimensionMismatch(f"{len(weights)} weight matrices for {spec.L} layers")
    return [_check_weight(layer, w, i) for i, (layer, w) in enumerate(zip(spec.layers, weights), start=1)]


# ===== EVALUATION =====

def effective_matrix(layer: LayerSpec, weight) -> DenseMatrix:
    """The fully connected matrix C_i a layer multiplies its input by"""
    W = _check_weight(layer, weight)
    if layer.kind is LayerKind.FULLY_CONNECTED:
        return W
    conv = conv_weight(layer, W)
    if layer.kind is LayerKind.POINTWISE_CONV:
        return gamma_pointwise(conv, outputs_per_filter(layer))
    if layer.kind is LayerKind.DEPTHWISE_CONV:
        return gamma_depthwise(conv, layer_plan(layer))
    return gamma_standard(conv, layer_plan(layer))


def apply_layer(layer: LayerSpec, weight, Z) -> DenseMatrix:
    """C_i Z computed by the direct window operators, without building C_i"""
    W = _check_weight(layer, weight)
    if layer.kind is LayerKind.FULLY_CONNECTED:
        return W @ as_matrix(Z)
    conv = conv_weight(layer, W)
    if layer.kind is LayerKind.POINTWISE_CONV:
        return mu_pointwise(conv, outputs_per_filter(layer), Z)
    if layer.kind is LayerKind.DEPTHWISE_CONV:
        return mu_depthwise(conv, layer_plan(layer), Z)
    return mu_direct(conv, layer_plan(layer), Z)


def forward(spec: NetworkSpec, weights: Sequence, X) -> DenseMatrix:
    """sigma_L(C_L ... sigma_1(C_1 X)) for a d x n input X"""
    matrices = check_network(spec, weights)
    Z = as_matrix(X)
    if Z.shape[0] != spec.input_dim:
        raise DimensionMismatch(f"input has {Z.shape[0]} rows, network expects {spec.input_dim}")
    for layer, W in zip(spec.layers, matrices):
        Z = effective_matrix(layer, W) @ Z
        if layer.activation is Activation.RELU:
            Z = np.maximum(Z, 0.0)
    return Z


# ===== NORMS =====

def _exact_spectral(layer: LayerSpec, W: DenseMatrix, C: DenseMatrix) -> float:
    if layer.kind is LayerKind.DEPTHWISE_CONV:
        # block diagonal: one Omega block per channel
        conv = conv_weight(layer, W)
        plan = layer_plan(layer)
        blocks = [
            spectral_norm_exact(gamma_standard(ConvWeight.depthwise(conv.filters[i:i + 1], k=layer.k), plan))
            for i in range(conv.c)
        ]
        return max(blocks)
    return spectral_norm_exact(C)


def _depthwise_disjoint(layer: LayerSpec) -> bool:
    return all(layer.stride >= k for k in layer.k)


def layer_norms(
    layer: LayerSpec,
    weight,
    mode: NormMode = NormMode.EXACT,
    tight_depthwise: bool = False
) -> LayerNorms:
    """a_i, s_i and the 2,1-norm of one layer

    Args:
        layer: Layer description
        weight: A_i for FC layers, W_i (c x r) for conv layers
        mode: ``exact`` materializes the effective matrix; ``bounded`` uses
            the closed-form bounds and never builds it
        tight_depthwise: In bounded mode, use max_i ||w^i|| for depthwise
            layers with disjoint windows instead of ||W||_F

    Returns:
        LayerNorms with the layer's shape descriptors filled in
    """
    mode = NormMode(mode)
    W = _check_weight(layer, weight)
    a = frobenius_norm(W)
    m = outputs_per_filter(layer)
    c, r = weight_shape(layer)

    if mode is NormMode.EXACT:
        C = effective_matrix(layer, W)
        cap = config.oracle_cap()
        if min(C.shape) > cap:
            raise OracleTooLarge(min(C.shape), cap)
        s = _exact_spectral(layer, W, C)
        n21 = norm_2_1(C)
        gamma_fnorm = frobenius_norm(C)
    elif layer.kind is LayerKind.FULLY_CONNECTED:
        s = spectral_norm_exact(W)
        n21 = bound_21_fc(a, layer.d_out)
        gamma_fnorm = a
    else:
        conv = conv_weight(layer, W)
        if layer.kind is LayerKind.STANDARD_CONV:
            s = bound_standard(conv, m)
        elif layer.kind is LayerKind.POINTWISE_CONV:
            s = spectral_pointwise(conv)
        elif not _depthwise_disjoint(layer):
            s = bound_depthwise_overlap(conv)
        elif tight_depthwise:
            s = exact_depthwise_nonoverlap(conv)
        else:
            s = bound_depthwise_nonoverlap(conv)
        n21 = bound_21_conv(a, m, c)
        gamma_fnorm = gamma_f_norm_standard(conv, m)

    logger.debug("%s layer norms (%s): a=%.6g s=%.6g n21=%.6g", layer.kind.value, mode.value, a, s, n21)
    return LayerNorms(
        a=a, s=s, n21=n21, mode=mode, gamma_fnorm=gamma_fnorm, kind=layer.kind,
        d_in=layer.d_in, d_out=layer.d_out, channels=c,
        filter_dim=layer.d_in if layer.kind is LayerKind.FULLY_CONNECTED else r,
        outputs=m, lipschitz=layer.lipschitz,
    )


def network_norms(
    spec: NetworkSpec,
    weights: Sequence,
    mode: NormMode = NormMode.EXACT,
    tight_depthwise: bool = False
) -> Tuple[LayerNorms, ...]:
    matrices = check_network(spec, weights)
    return tuple(
        layer_norms(layer, W, mode, tight_depthwise) for layer, W in zip(spec.layers, matrices)
    )


def max_width(spec: NetworkSpec) -> int:
    """Largest layer output width"""
    return max(layer.d_out for layer in spec.layers)


def lipschitz_product(spec: NetworkSpec) -> float:
    return math.prod(layer.lipschitz for layer in spec.layers)
