"""Six generalization-bound families evaluated side by side

All families are computed in log10 and exponentiated at the end, so a
report stays meaningful when a product of norms overflows a double.
"""

import logging
import math
import sys
from typing import Dict, List, Optional, Sequence

from lib.complexity import log10_sensitive_complexity
from lib.errors import DomainError, ZeroSpectralNorm
from lib.network import max_width, network_norms
from lib.types import (
    BoundFamily,
    BoundReport,
    ComplexityInputs,
    FamilyBound,
    LayerComplexity,
    LayerKind,
    LayerNorms,
    NetworkSpec,
    NormMode,
)

logger = logging.getLogger(__name__)

REPORT_NOTE = (
    "Each value is the expression inside its bound's O(.) with unit constants "
    "and log factors dropped; compare families by order of magnitude."
)

LOG10_MAX = math.log10(sys.float_info.max)
LOG10_2 = math.log10(2.0)

_FAMILY_ORDER = {family: i for i, family in enumerate(BoundFamily)}


def family_bound(family: BoundFamily, log10_value: float) -> FamilyBound:
    """FamilyBound from a log10 value; overflowing values become inf"""
    if log10_value > LOG10_MAX:
        return FamilyBound(family, math.inf, log10_value, True)
    if log10_value == -math.inf:
        return FamilyBound(family, 0.0, log10_value, False)
    try:
        return FamilyBound(family, 10.0 ** log10_value, log10_value, False)
    except OverflowError:
        return FamilyBound(family, math.inf, log10_value, True)


def _sorted(bounds: Dict[BoundFamily, float]) -> tuple:
    entries = [family_bound(family, value) for family, value in bounds.items()]
    return tuple(sorted(entries, key=lambda b: (b.log10_value, _FAMILY_ORDER[b.family])))


def _log10(x: float) -> float:
    return math.log10(x) if x > 0 else -math.inf


def _require_positive(**values):
    for name, value in values.items():
        if not value > 0:
            raise DomainError(f"{name} must be > 0, got {value}")


def _require_counts(L: int, n: int, count: int):
    if L < 1:
        raise DomainError(f"L must be >= 1, got {L}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if count != L:
        raise DomainError(f"{count} layer norms for L = {L}")


def _zoo(
    norms: Sequence[LayerNorms],
    frobenius: List[float],
    complexity: ComplexityInputs,
    width: int,
    L: int,
    n: int
) -> Dict[BoundFamily, float]:
    """log10 of every family from per-layer norms already resolved"""
    for i, layer in enumerate(norms, start=1):
        if layer.s == 0:
            raise ZeroSpectralNorm(f"layer {i} has spectral norm 0")

    half_log_n = 0.5 * math.log10(n)
    log_s = math.fsum(math.log10(layer.s) for layer in norms)
    log_f = math.fsum(_log10(f) for f in frobenius)
    log_width = math.log10(width)
    log_L = math.log10(L)

    bartlett_sum = math.fsum((layer.n21 / layer.s) ** (2.0 / 3.0) for layer in norms)
    pac_sum = math.fsum((f / layer.s) ** 2 for f, layer in zip(frobenius, norms))
    log_R = log10_sensitive_complexity(complexity)

    return {
        BoundFamily.NEYSHABUR15: L * LOG10_2 + log_f - half_log_n,
        BoundFamily.BARTLETT_SPECTRAL17: log_s - half_log_n + 1.5 * _log10(bartlett_sum),
        BoundFamily.NEYSHABUR_PAC17: log_s - half_log_n + 0.5 * (2 * log_L + log_width + _log10(pac_sum)),
        BoundFamily.GOLOWICH18: log_f + math.log10(min(n ** -0.25, math.sqrt(L / n))),
        BoundFamily.LI18: log_s + 0.5 * (log_L + 2 * log_width) - half_log_n,
        BoundFamily.OURS: (log_R - LOG10_2) / 4.0 - half_log_n,
    }


def _mode_of(norms: Sequence[LayerNorms]) -> Optional[NormMode]:
    modes = {layer.mode for layer in norms}
    return modes.pop() if len(modes) == 1 else None


def fnn_bounds(norms: Sequence[LayerNorms], d_max: int, L: int, n: int) -> BoundReport:
    """All six families for a fully connected network

    Layers without shape descriptors are taken to be d_max wide on both sides.
    """
    norms = tuple(norms)
    _require_counts(L, n, len(norms))
    _require_positive(d_max=d_max)

    frobenius = [layer.a if layer.gamma_fnorm is None else layer.gamma_fnorm for layer in norms]
    complexity = ComplexityInputs(tuple(
        LayerComplexity(
            is_conv=False, rho=layer.lipschitz, s=layer.s, a=layer.a,
            d_in=layer.d_in or d_max, d_out=layer.d_out or d_max,
        )
        for layer in norms
    ))
    logs = _zoo(norms, frobenius, complexity, d_max, L, n)
    return BoundReport(_sorted(logs), _mode_of(norms), False, n, norms, REPORT_NOTE)


def fcnn_bounds(norms: Sequence[LayerNorms], c: int, m: int, r: int, L: int, n: int) -> BoundReport:
    """All six families for a fully convolutional network

    ``c``, ``m`` and ``r`` are the network-wide filter count, outputs per
    filter and filter size, used for any layer whose norms lack descriptors
    and for the width c m.
    """
    norms = tuple(norms)
    _require_counts(L, n, len(norms))
    _require_positive(c=c, m=m, r=r)

    frobenius = [
        math.sqrt(layer.outputs or m) * layer.a if layer.gamma_fnorm is None else layer.gamma_fnorm
        for layer in norms
    ]
    complexity = ComplexityInputs(tuple(
        LayerComplexity(
            is_conv=True, rho=layer.lipschitz, s=layer.s, a=layer.a,
            d_in=layer.d_in or m * c, d_out=layer.d_out or m * c,
            channels=layer.channels or c, filter_dim=layer.filter_dim or r,
        )
        for layer in norms
    ))
    logs = _zoo(norms, frobenius, complexity, c * m, L, n)
    return BoundReport(_sorted(logs), _mode_of(norms), False, n, norms, REPORT_NOTE)


def _simplified(logs: Dict[BoundFamily, float], n: int) -> BoundReport:
    return BoundReport(_sorted(logs), None, False, n, (), REPORT_NOTE)


def simplified_fnn_bounds(a: float, s: float, d: int, L: int, n: int) -> BoundReport:
    """Closed forms under uniform norms a, s and width d"""
    _require_positive(a=a, s=s, d=d, L=L, n=n)
    la, ls, ld, lL, ln = (math.log10(v) for v in (a, s, d, L, n))
    bartlett = (L - 1) * ls + 1.5 * lL + la + 0.5 * ld - 0.5 * ln
    return _simplified({
        BoundFamily.NEYSHABUR15: L * (LOG10_2 + la) - 0.5 * ln,
        BoundFamily.BARTLETT_SPECTRAL17: bartlett,
        BoundFamily.NEYSHABUR_PAC17: bartlett,
        BoundFamily.GOLOWICH18: L * la + math.log10(min(n ** -0.25, math.sqrt(L / n))),
        BoundFamily.LI18: L * ls + 0.5 * lL + ld - 0.5 * ln,
        BoundFamily.OURS: (L - 1) / 4.0 * ls + 0.75 * lL + 0.25 * la + ld - 0.5 * ln,
    }, n)


def simplified_fcnn_bounds(a: float, s: float, c: int, m: int, r: int, L: int, n: int) -> BoundReport:
    """Closed forms under uniform norms for L conv layers of c filters, m outputs and size r"""
    _require_positive(a=a, s=s, c=c, m=m, r=r, L=L, n=n)
    la, ls, lc, lm, lr, lL, ln = (math.log10(v) for v in (a, s, c, m, r, L, n))
    bartlett = (L - 1) * ls + 1.5 * lL + la + 0.5 * lc + lm - 0.5 * ln
    return _simplified({
        BoundFamily.NEYSHABUR15: L * (LOG10_2 + la + 0.5 * lm) - 0.5 * ln,
        BoundFamily.BARTLETT_SPECTRAL17: bartlett,
        BoundFamily.NEYSHABUR_PAC17: bartlett,
        BoundFamily.GOLOWICH18: L * (la + 0.5 * lm) + math.log10(min(n ** -0.25, math.sqrt(L / n))),
        BoundFamily.LI18: L * ls + 0.5 * lL + lc + lm - 0.5 * ln,
        BoundFamily.OURS: (
            (L - 1) / 4.0 * ls + 0.75 * lL + 0.25 * la + 0.5 * lc + lm / 8.0 + 0.5 * lr - 0.5 * ln
        ),
    }, n)


def architecture_comparison(
    spec: NetworkSpec,
    weights: Sequence,
    mode: NormMode = NormMode.BOUNDED,
    ignore_n: bool = True,
    n: int = 1,
    tight_depthwise: bool = False
) -> BoundReport:
    """Six-family comparison for an arbitrary (possibly mixed) network

    Layers keep their own kind: FC layers enter the complexity with
    d_i^2 d_{i-1}^2, conv layers with c_i^2 r_i^2 sqrt(m_i). Frobenius-type
    norms are those of the effective matrices and the width is the largest
    layer output.

    Args:
        spec: Network description
        weights: One matrix per layer
        mode: Norm resolution for every layer
        ignore_n: Drop the sample-count factors (evaluate at n = 1)
        n: Sample count used when ``ignore_n`` is False
        tight_depthwise: Forwarded to ``layer_norms``

    Returns:
        BoundReport sorted ascending by log10 value
    """
    mode = NormMode(mode)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    norms = network_norms(spec, weights, mode, tight_depthwise)
    effective_n = 1 if ignore_n else n

    frobenius = [layer.gamma_fnorm for layer in norms]
    complexity = ComplexityInputs(tuple(
        LayerComplexity(
            is_conv=layer.kind is not LayerKind.FULLY_CONNECTED, rho=layer.lipschitz,
            s=layer.s, a=layer.a, d_in=layer.d_in, d_out=layer.d_out,
            channels=layer.channels, filter_dim=layer.filter_dim,
        )
        for layer in norms
    ))
    logs = _zoo(norms, frobenius, complexity, max_width(spec), spec.L, effective_n)
    report = BoundReport(_sorted(logs), mode, ignore_n, effective_n, norms, REPORT_NOTE)
    logger.info(
        "Compared %d-layer network (%s mode): smallest %s, largest %s",
        spec.L, mode.value, report.bounds[0].family.value, report.bounds[-1].family.value
    )
    return report
