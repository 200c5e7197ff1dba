"""Type definitions for ConvBound"""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt

from lib.errors import DomainError, DimensionMismatch

# Dense real matrix: a finite, 2-D float64 ndarray (see linalg.as_matrix)
DenseMatrix = npt.NDArray[np.float64]


class LayerKind(str, Enum):
    """Layer kinds a network may contain"""
    FULLY_CONNECTED = 'fc'
    STANDARD_CONV = 'standard'
    DEPTHWISE_CONV = 'depthwise'
    POINTWISE_CONV = 'pointwise'

    @property
    def is_conv(self) -> bool:
        return self is not LayerKind.FULLY_CONNECTED


class ConvKind(str, Enum):
    """Convolution flavours a ConvWeight can describe"""
    STANDARD = 'standard'
    DEPTHWISE = 'depthwise'
    POINTWISE = 'pointwise'


class Activation(str, Enum):
    RELU = 'relu'
    IDENTITY = 'identity'


class NormMode(str, Enum):
    """How per-layer norms are resolved"""
    EXACT = 'exact'
    BOUNDED = 'bounded'


class BoundFamily(str, Enum):
    """The six generalization-bound families compared in a BoundReport"""
    NEYSHABUR15 = 'Neyshabur15'
    BARTLETT_SPECTRAL17 = 'BartlettSpectral17'
    NEYSHABUR_PAC17 = 'NeyshaburPAC17'
    GOLOWICH18 = 'Golowich18'
    LI18 = 'Li18'
    OURS = 'Ours'


@dataclass(frozen=True)
class SpectralResult:
    """Outcome of an iterative spectral-norm computation"""
    value: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class IndexSet:
    """Positions (1-based) read by one sliding-window application of a filter"""
    indices: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class LoweringPlan:
    """The m index sets S_1..S_m a filter of length r is applied on"""
    input_dim: int
    filter_dim: int
    sets: Tuple[IndexSet, ...]
    stride: int = 1

    def __post_init__(self):
        if self.input_dim < 1 or self.filter_dim < 1:
            raise DomainError("input_dim and filter_dim must be positive")
        if self.stride < 1:
            raise DomainError(f"stride must be >= 1, got {self.stride}")
        if not self.sets:
            raise DomainError("a lowering plan needs at least one index set")
        for j, index_set in enumerate(self.sets, start=1):
            if len(index_set) != self.filter_dim:
                raise DimensionMismatch(
                    f"index set {j} has {len(index_set)} entries, filter_dim is {self.filter_dim}"
                )
            if len(set(index_set.indices)) != self.filter_dim:
                raise DomainError(f"index set {j} repeats a position")
            if min(index_set.indices) < 1 or max(index_set.indices) > self.input_dim:
                raise DomainError(f"index set {j} leaves [1, {self.input_dim}]")

    @property
    def m(self) -> int:
        return len(self.sets)

    @cached_property
    def index_array(self) -> np.ndarray:
        """0-based (m, r) integer array of the sets"""
        array = np.array([s.indices for s in self.sets], dtype=np.intp) - 1
        array.setflags(write=False)
        return array

    def is_disjoint(self) -> bool:
        """True when no input position is read by two different sets"""
        return np.unique(self.index_array).size == self.index_array.size


@dataclass(frozen=True, eq=False)
class ConvWeight:
    """Filter matrix W (c x r) of one convolutional layer plus its shape metadata"""
    filters: np.ndarray
    kind: ConvKind
    spatial_k: Tuple[int, ...]
    channels_in: int
    channels_out: int

    def __post_init__(self):
        filters = np.array(self.filters, dtype=np.float64, ndmin=2)
        if filters.ndim != 2:
            raise DimensionMismatch(f"filters must be a c x r matrix, got shape {filters.shape}")
        if not np.all(np.isfinite(filters)):
            raise DomainError("filters contain non-finite values")
        filters.setflags(write=False)
        object.__setattr__(self, 'filters', filters)

        c, r = filters.shape
        window = int(np.prod(self.spatial_k)) if self.spatial_k else 1
        if self.kind is ConvKind.DEPTHWISE:
            if r != window or not (c == self.channels_in == self.channels_out):
                raise DimensionMismatch(
                    f"depthwise weight needs r = k ({window}) and c = channels_in = channels_out, "
                    f"got {c}x{r} with channels {self.channels_in}->{self.channels_out}"
                )
        elif self.kind is ConvKind.POINTWISE:
            if window != 1 or r != self.channels_in or c != self.channels_out:
                raise DimensionMismatch(
                    f"pointwise weight needs spatial_k = 1 and shape {self.channels_out}x{self.channels_in}, "
                    f"got {c}x{r}"
                )
        elif r != window * self.channels_in or c != self.channels_out:
            raise DimensionMismatch(
                f"standard weight needs shape {self.channels_out}x{window * self.channels_in}, got {c}x{r}"
            )

    @classmethod
    def standard(cls, filters, k=None, channels_in: int = 1) -> 'ConvWeight':
        filters = np.array(filters, dtype=np.float64, ndmin=2)
        if k is None:
            k = (filters.shape[1] // channels_in,)
        return cls(filters, ConvKind.STANDARD, _as_shape(k), channels_in, filters.shape[0])

    @classmethod
    def depthwise(cls, filters, k=None) -> 'ConvWeight':
        filters = np.array(filters, dtype=np.float64, ndmin=2)
        if k is None:
            k = (filters.shape[1],)
        c = filters.shape[0]
        return cls(filters, ConvKind.DEPTHWISE, _as_shape(k), c, c)

    @classmethod
    def pointwise(cls, filters) -> 'ConvWeight':
        filters = np.array(filters, dtype=np.float64, ndmin=2)
        return cls(filters, ConvKind.POINTWISE, (1,), filters.shape[1], filters.shape[0])

    @property
    def c(self) -> int:
        return self.filters.shape[0]

    @property
    def filter_dim(self) -> int:
        return self.filters.shape[1]


def _as_shape(k) -> Tuple[int, ...]:
    if isinstance(k, (int, np.integer)):
        return (int(k),)
    return tuple(int(v) for v in k)


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a network

    ``k`` and ``spatial`` are per spatial axis (1 or 2 entries). ``spatial`` is
    the input's spatial shape; when empty it is taken to be ``(d_in // c_in,)``.
    """
    kind: LayerKind
    d_in: int
    d_out: int
    k: Tuple[int, ...] = ()
    stride: int = 1
    c_in: int = 1
    c_out: int = 1
    lipschitz: float = 1.0
    activation: Activation = Activation.RELU
    spatial: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'kind', LayerKind(self.kind))
        object.__setattr__(self, 'activation', Activation(self.activation))
        object.__setattr__(self, 'k', _as_shape(self.k))
        object.__setattr__(self, 'spatial', _as_shape(self.spatial))

    @property
    def input_spatial(self) -> Tuple[int, ...]:
        if self.spatial:
            return self.spatial
        return (self.d_in // max(self.c_in, 1),)


@dataclass(frozen=True)
class NetworkSpec:
    """Input dimension plus the ordered layers of a network"""
    input_dim: int
    layers: Tuple[LayerSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'layers', tuple(self.layers))

    @property
    def L(self) -> int:
        return len(self.layers)


@dataclass(frozen=True)
class LayerNorms:
    """Norms of one layer's effective matrix

    ``a`` is ||A||_F for fully connected layers and ||W||_F for conv layers;
    ``gamma_fnorm`` is the Frobenius norm of the effective matrix itself.
    The shape descriptors are optional so hand-built norm tables can rely on
    the uniform widths passed to the bound evaluators.
    """
    a: float
    s: float
    n21: float
    mode: NormMode = NormMode.EXACT
    gamma_fnorm: Optional[float] = None
    kind: Optional[LayerKind] = None
    d_in: Optional[int] = None
    d_out: Optional[int] = None
    channels: Optional[int] = None
    filter_dim: Optional[int] = None
    outputs: Optional[int] = None
    lipschitz: float = 1.0

    def __post_init__(self):
        if min(self.a, self.s, self.n21) < 0 or (self.gamma_fnorm is not None and self.gamma_fnorm < 0):
            raise DomainError("layer norms must be nonnegative")

    def scaled(self, t: float) -> 'LayerNorms':
        """Norms of the same layer with every weight multiplied by t > 0"""
        return LayerNorms(
            a=self.a * t, s=self.s * t, n21=self.n21 * t, mode=self.mode,
            gamma_fnorm=None if self.gamma_fnorm is None else self.gamma_fnorm * t,
            kind=self.kind, d_in=self.d_in, d_out=self.d_out, channels=self.channels,
            filter_dim=self.filter_dim, outputs=self.outputs, lipschitz=self.lipschitz,
        )


@dataclass(frozen=True)
class ToeplitzSpec:
    """Generating sequence t_0..t_b of a symmetric banded Toeplitz matrix"""
    t: Tuple[float, ...]
    band: int

    def __post_init__(self):
        object.__setattr__(self, 't', tuple(float(v) for v in self.t))
        if self.band < 0 or len(self.t) != self.band + 1:
            raise DomainError(f"Toeplitz sequence needs band + 1 = {self.band + 1} entries, got {len(self.t)}")


@dataclass(frozen=True)
class LayerComplexity:
    """Per-layer quantities entering the sensitive complexity

    Fully connected layers use ``d_in``/``d_out``; conv layers use
    ``channels`` (c_i), ``filter_dim`` (r_i) and ``d_out`` (d_i).
    """
    is_conv: bool
    rho: float
    s: float
    a: float
    d_in: int
    d_out: int
    channels: int = 1
    filter_dim: int = 1

    def __post_init__(self):
        if self.rho <= 0:
            raise DomainError(f"Lipschitz constant must be positive, got {self.rho}")
        if self.a < 0 or self.s < 0:
            raise DomainError("a and s must be nonnegative")


@dataclass(frozen=True)
class ComplexityInputs:
    layers: Tuple[LayerComplexity, ...]

    def __post_init__(self):
        object.__setattr__(self, 'layers', tuple(self.layers))
        if not self.layers:
            raise DomainError("complexity needs at least one layer")

    @property
    def L(self) -> int:
        return len(self.layers)


@dataclass(frozen=True, eq=False)
class RiskSample:
    """Network outputs (k classes x n examples) and 1-based labels"""
    logits: np.ndarray
    labels: Tuple[int, ...]

    def __post_init__(self):
        logits = np.array(self.logits, dtype=np.float64, ndmin=2)
        labels = tuple(int(y) for y in self.labels)
        k, n = logits.shape
        if k < 2:
            raise DomainError(f"need at least 2 classes, got {k}")
        if n < 1 or len(labels) != n:
            raise DimensionMismatch(f"{len(labels)} labels for {n} logit columns")
        if min(labels) < 1 or max(labels) > k:
            raise DomainError(f"labels must lie in [1, {k}]")
        if not np.all(np.isfinite(logits)):
            raise DomainError("logits must be finite")
        logits.setflags(write=False)
        object.__setattr__(self, 'logits', logits)
        object.__setattr__(self, 'labels', labels)

    @property
    def n(self) -> int:
        return self.logits.shape[1]


@dataclass(frozen=True)
class MarginSummary:
    """Order statistics of a margin distribution plus both empirical risks"""
    n: int
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    mean: float
    ramp_risk: Optional[float] = None
    zero_one_risk: Optional[float] = None


@dataclass(frozen=True)
class BoundParams:
    """Margin, confidence, sample count and data norm of a generalization bound"""
    eta: float
    delta: float
    n: int
    x_fnorm: float

    def __post_init__(self):
        if not self.eta > 0:
            raise DomainError(f"eta must be > 0, got {self.eta}")
        if not 0 < self.delta < 1:
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        if not self.x_fnorm >= 0:
            raise DomainError(f"x_fnorm must be >= 0, got {self.x_fnorm}")


@dataclass(frozen=True)
class FamilyBound:
    """One family's value; ``log10_value`` stays finite when ``value`` overflows"""
    family: BoundFamily
    value: float
    log10_value: float
    overflow: bool = False


@dataclass(frozen=True)
class BoundReport:
    """Six-family comparison, ascending by log10 value"""
    bounds: Tuple[FamilyBound, ...]
    mode: Optional[NormMode]
    ignore_n: bool
    n: int
    layers: Tuple[LayerNorms, ...] = ()
    note: str = ''

    def get(self, family: BoundFamily) -> FamilyBound:
        family = BoundFamily(family)
        for bound in self.bounds:
            if bound.family is family:
                return bound
        raise KeyError(family)

    def ranking(self) -> Tuple[BoundFamily, ...]:
        return tuple(b.family for b in self.bounds)


@dataclass(frozen=True, eq=False)
class NetBundle:
    """A network description with one weight matrix per layer"""
    spec: NetworkSpec
    weights: Tuple[np.ndarray, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, 'weights', tuple(np.asarray(w, dtype=np.float64) for w in self.weights))


@dataclass(frozen=True)
class VerificationResult:
    """Outcome of one property in the oracle suite"""
    name: str
    trials: int
    violations: int
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.violations == 0
