"""Sensitive complexity, covering-number formulas, Rademacher and generalization bounds, margins

Every bound here is a closed-form evaluation. The log10 companions exist for
networks whose complexity overflows a double.
"""

import logging
import math
import sys
from typing import Iterable, Optional, Sequence

import numpy as np

from lib.errors import DimensionMismatch, DomainError, ZeroSpectralNorm
from lib.types import (
    BoundParams,
    ComplexityInputs,
    LayerComplexity,
    LayerKind,
    LayerNorms,
    MarginSummary,
    RiskSample,
)

logger = logging.getLogger(__name__)

LOG10_2 = math.log10(2.0)
LOG10_MAX = math.log10(sys.float_info.max)


# ===== SENSITIVE COMPLEXITY =====

def complexity_inputs(norms: Iterable[LayerNorms]) -> ComplexityInputs:
    """Build ComplexityInputs from layer norms carrying their shape descriptors"""
    layers = []
    for i, layer in enumerate(norms, start=1):
        needed = (layer.kind, layer.d_in, layer.d_out, layer.channels, layer.filter_dim)
        if any(v is None for v in needed):
            raise DomainError(f"layer {i}: norms carry no shape descriptors, build LayerComplexity by hand")
        if layer.kind is LayerKind.FULLY_CONNECTED:
            layers.append(LayerComplexity(
                is_conv=False, rho=layer.lipschitz, s=layer.s, a=layer.a,
                d_in=layer.d_in, d_out=layer.d_out,
            ))
        else:
            layers.append(LayerComplexity(
                is_conv=True, rho=layer.lipschitz, s=layer.s, a=layer.a,
                d_in=layer.d_in, d_out=layer.d_out,
                channels=layer.channels, filter_dim=layer.filter_dim,
            ))
    return ComplexityInputs(tuple(layers))


def _require_nonzero_s(inp: ComplexityInputs):
    for i, layer in enumerate(inp.layers, start=1):
        if layer.s == 0:
            raise ZeroSpectralNorm(f"layer {i} has spectral norm 0")


def sensitive_complexity(inp: ComplexityInputs) -> float:
    """(2 prod rho_i s_i) (sum of per-layer terms) L^2

    FC layers contribute d_i^2 d_{i-1}^2 a_i / s_i, conv layers
    c_i^2 r_i^2 a_i sqrt(d_i / c_i) / s_i.

    Accumulated in log10 so no partial product overflows; the result is inf
    only when the value itself exceeds a double (see ``complexity_overflows``).

    Raises:
        ZeroSpectralNorm: some s_i is 0
    """
    return _linear(log10_sensitive_complexity(inp))


def sensitive_complexity_fnn(inp: ComplexityInputs) -> float:
    """All-FC specialization"""
    if any(layer.is_conv for layer in inp.layers):
        raise DomainError("fully connected complexity given a conv layer")
    return _linear(log10_sensitive_complexity(inp))


def sensitive_complexity_fcnn(inp: ComplexityInputs) -> float:
    """All-conv specialization"""
    if not all(layer.is_conv for layer in inp.layers):
        raise DomainError("convolutional complexity given a fully connected layer")
    return _linear(log10_sensitive_complexity(inp))


def _log10_sum(logs: Sequence[float]) -> float:
    finite = [v for v in logs if v != -math.inf]
    if not finite:
        return -math.inf
    top = max(finite)
    return top + math.log10(math.fsum(10.0 ** (v - top) for v in finite))


def _log10(x: float) -> float:
    return math.log10(x) if x > 0 else -math.inf


def _log10_term(layer: LayerComplexity) -> float:
    if layer.a == 0:
        return -math.inf
    if layer.is_conv:
        return (
            2 * _log10(layer.channels) + 2 * _log10(layer.filter_dim) + _log10(layer.a)
            + 0.5 * (_log10(layer.d_out) - _log10(layer.channels)) - _log10(layer.s)
        )
    return 2 * _log10(layer.d_out) + 2 * _log10(layer.d_in) + _log10(layer.a) - _log10(layer.s)


def log10_sensitive_complexity(inp: ComplexityInputs) -> float:
    """log10 of the sensitive complexity, finite where the linear value overflows

    Returns -inf when every a_i is 0.
    """
    _require_nonzero_s(inp)
    log_sum = _log10_sum([_log10_term(layer) for layer in inp.layers])
    if log_sum == -math.inf:
        return -math.inf
    log_product = math.fsum(_log10(layer.rho) + _log10(layer.s) for layer in inp.layers)
    return LOG10_2 + log_product + log_sum + 2 * _log10(inp.L)


def _linear(log10_value: float) -> float:
    if log10_value == -math.inf:
        return 0.0
    if log10_value > LOG10_MAX:
        logger.warning("Sensitive complexity overflows a double (log10 %.3f)", log10_value)
        return math.inf
    try:
        return 10.0 ** log10_value
    except OverflowError:
        return math.inf


def complexity_overflows(inp: ComplexityInputs) -> bool:
    """True when the linear sensitive complexity is reported as inf"""
    return math.isinf(sensitive_complexity(inp))


def frobenius_complexity(inp: ComplexityInputs) -> float:
    """Sensitive complexity with s_i replaced by its Frobenius-norm upper bound

    Conv layers use s_i = sqrt(d_i / c_i) a_i, FC layers s_i = a_i; the
    a_i / s_i ratios cancel and only the dimension terms remain.
    """
    if any(layer.a == 0 for layer in inp.layers):
        return 0.0
    substituted = []
    for layer in inp.layers:
        s = layer.a * math.sqrt(layer.d_out / layer.channels) if layer.is_conv else layer.a
        substituted.append(LayerComplexity(
            is_conv=layer.is_conv, rho=layer.rho, s=s, a=layer.a, d_in=layer.d_in,
            d_out=layer.d_out, channels=layer.channels, filter_dim=layer.filter_dim,
        ))
    return sensitive_complexity(ComplexityInputs(tuple(substituted)))


# ===== COVERING NUMBERS =====

def _require_eps(eps: float):
    if not eps > 0:
        raise DomainError(f"eps must be > 0, got {eps}")


def _require_a(a: float):
    if not a >= 0:
        raise DomainError(f"a must be >= 0, got {a}")


def covering_ball_bound(r: int, a: float, eps: float) -> float:
    """r ln(1 + 2a/eps): log covering number of the radius-a ball in R^r"""
    _require_eps(eps)
    _require_a(a)
    return r * math.log1p(2.0 * a / eps)


def covering_fc_layer_bound(d_in: int, d_out: int, a: float, z_fnorm: float, eps: float) -> float:
    _require_eps(eps)
    _require_a(a)
    return d_in * d_out * math.log1p(2.0 * a * z_fnorm / eps)


def covering_conv_layer_bound(c: int, r: int, a: float, m: int, z_fnorm: float, eps: float) -> float:
    """c r ln(1 + 2a sqrt(m) ||Z||_F / eps); the count of free parameters is c r, not d_out d_in"""
    _require_eps(eps)
    _require_a(a)
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    return c * r * math.log1p(2.0 * a * math.sqrt(m) * z_fnorm / eps)


def covering_network_bound(x_fnorm: float, R: float, eps: float) -> float:
    """sqrt(||X||_F R / eps)"""
    _require_eps(eps)
    if not R >= 0:
        raise DomainError(f"R must be >= 0, got {R}")
    return math.sqrt(x_fnorm * R / eps)


def covering_ratio(d_in: int, c: int, r: int, m: int) -> float:
    """FC covering bound over conv covering bound for the same layer: m d_in / r

    The FC side treats the lowered matrix as free (d_out = m c entries per input,
    Frobenius norm sqrt(m) a); c cancels.
    """
    if min(d_in, c, r, m) < 1:
        raise DomainError("d_in, c, r and m must be positive")
    return m * d_in / r


# ===== RADEMACHER AND GENERALIZATION =====

def rademacher_bound(params: BoundParams, R: float) -> float:
    """16 n^(-5/8) (2 ||X||_F R / eta)^(1/4)"""
    if not R >= 0:
        raise DomainError(f"R must be >= 0, got {R}")
    return 16.0 * params.n ** (-5.0 / 8.0) * (2.0 * params.x_fnorm * R / params.eta) ** 0.25


def rademacher_bound_log10(params: BoundParams, log10_R: float) -> float:
    """log10 of ``rademacher_bound`` taking log10 R"""
    if params.x_fnorm == 0 or log10_R == -math.inf:
        return -math.inf
    return (
        math.log10(16.0) - 5.0 / 8.0 * math.log10(params.n)
        + 0.25 * (LOG10_2 + math.log10(params.x_fnorm) + log10_R - math.log10(params.eta))
    )


def _confidence_term(params: BoundParams) -> float:
    return 3.0 * math.sqrt(-math.log(params.delta) / (2.0 * params.n))


def _require_risk(empirical_risk: float):
    if not 0.0 <= empirical_risk <= 1.0:
        raise DomainError(f"empirical risk must lie in [0, 1], got {empirical_risk}")


def generalization_bound(empirical_risk: float, params: BoundParams, R: float) -> float:
    """empirical risk + 2 x Rademacher bound + 3 sqrt(ln(1/delta) / (2n))"""
    _require_risk(empirical_risk)
    return empirical_risk + 2.0 * rademacher_bound(params, R) + _confidence_term(params)


def generalization_bound_log10(empirical_risk: float, params: BoundParams, log10_R: float) -> float:
    _require_risk(empirical_risk)
    return _log10_sum([
        _log10(empirical_risk),
        LOG10_2 + rademacher_bound_log10(params, log10_R),
        _log10(_confidence_term(params)),
    ])


# ===== MARGINS AND RISKS =====

def margin(column: Sequence[float], y: int) -> float:
    """f(x)_y - max_{j != y} f(x)_j for a 1-based label y"""
    f = np.asarray(column, dtype=np.float64).ravel()
    if f.size < 2:
        raise DomainError(f"need at least 2 classes, got {f.size}")
    if not 1 <= y <= f.size:
        raise DomainError(f"label {y} outside [1, {f.size}]")
    others = np.delete(f, y - 1)
    return float(f[y - 1] - np.max(others))


def margins(sample: RiskSample) -> np.ndarray:
    """Margin of every column of the sample"""
    f = sample.logits
    cols = np.arange(sample.n)
    rows = np.asarray(sample.labels, dtype=np.intp) - 1
    own = f[rows, cols]
    masked = f.copy()
    masked[rows, cols] = -np.inf
    return own - np.max(masked, axis=0)


def _ramp(r: np.ndarray, eta: float) -> np.ndarray:
    return np.where(r < -eta, 0.0, np.where(r <= 0.0, 1.0 + r / eta, 1.0))


def _require_eta(eta: float):
    if not eta > 0:
        raise DomainError(f"eta must be > 0, got {eta}")


def ramp_loss(column: Sequence[float], y: int, eta: float) -> float:
    """g_eta(-margin): 0 past margin eta, 1 at or below margin 0, linear between"""
    _require_eta(eta)
    return float(_ramp(np.float64(-margin(column, y)), eta))


def empirical_ramp_risk(sample: RiskSample, eta: float) -> float:
    _require_eta(eta)
    losses = _ramp(-margins(sample), eta)
    return math.fsum(losses) / sample.n


def empirical_zero_one_risk(sample: RiskSample) -> float:
    """Fraction misclassified; argmax ties go to the smallest class index"""
    predicted = np.argmax(sample.logits, axis=0) + 1
    wrong = int(np.count_nonzero(predicted != np.asarray(sample.labels)))
    return wrong / sample.n


def margin_summary(sample: RiskSample, eta: Optional[float] = None) -> MarginSummary:
    """Quartiles and mean of the margins, with the risks filled in when eta is given"""
    values = margins(sample)
    q1, median, q3 = np.percentile(values, [25.0, 50.0, 75.0])
    return MarginSummary(
        n=sample.n,
        minimum=float(np.min(values)),
        q1=float(q1),
        median=float(median),
        q3=float(q3),
        maximum=float(np.max(values)),
        mean=math.fsum(values) / sample.n,
        ramp_risk=None if eta is None else empirical_ramp_risk(sample, eta),
        zero_one_risk=empirical_zero_one_risk(sample),
    )


def risk_sample(logits, labels: Sequence[int]) -> RiskSample:
    """RiskSample from a k x n logit matrix, checking the label count first"""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise DimensionMismatch(f"logits must be k x n, got shape {logits.shape}")
    return RiskSample(logits, tuple(labels))
