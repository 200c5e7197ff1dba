"""
Network bundle format, seeded weight generation and reference architectures.

A bundle is a JSON manifest plus little-endian float64 row-major payloads,
either in a ``<stem>.bin`` sidecar or base64-inlined into the manifest.
"""

import base64
import binascii
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np

from lib.errors import (
    BundleIOError,
    DomainError,
    InvalidNetwork,
    NonFiniteWeight,
    ParseError,
    ShapeMismatch,
)
from lib.network import validate, weight_shape
from lib.prng import SplitMix64
from lib.types import Activation, LayerKind, LayerSpec, NetBundle, NetworkSpec

logger = logging.getLogger(__name__)

BUNDLE_FORMAT = 'convbound-bundle'
BUNDLE_VERSION = 1
INLINE_LIMIT = 64 * 1024  # bytes of payload below which weights are inlined
PAYLOAD_DTYPE = np.dtype('<f8')


# ===== MANIFEST =====

def _layer_manifest(layer: LayerSpec) -> Dict[str, Any]:
    entry = {
        'kind': layer.kind.value,
        'd_in': layer.d_in,
        'd_out': layer.d_out,
        'k': list(layer.k),
        'stride': layer.stride,
        'c_in': layer.c_in,
        'c_out': layer.c_out,
        'lipschitz': float(layer.lipschitz),
        'activation': layer.activation.value,
    }
    if layer.spatial:
        entry['spatial'] = list(layer.spatial)
    return entry


def _require_int(value, where: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"expected an integer, got {json.dumps(value)}", where)
    if value < minimum:
        raise ParseError(f"must be >= {minimum}, got {value}", where)
    return value


def _require_int_list(value, where: str) -> List[int]:
    if isinstance(value, int) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, list):
        raise ParseError("expected a list of integers", where)
    return [_require_int(v, f"{where}[{i}]", 1) for i, v in enumerate(value)]


def _parse_layer(entry, where: str) -> LayerSpec:
    if not isinstance(entry, dict):
        raise ParseError("expected an object", where)
    for key in ('kind', 'd_in', 'd_out'):
        if key not in entry:
            raise ParseError("missing field", f"{where}.{key}")

    try:
        kind = LayerKind(entry['kind'])
    except ValueError:
        raise ParseError(f"unknown layer kind {json.dumps(entry['kind'])}", f"{where}.kind")
    try:
        activation = Activation(entry.get('activation', 'relu'))
    except ValueError:
        raise ParseError(f"unknown activation {json.dumps(entry['activation'])}", f"{where}.activation")

    lipschitz = entry.get('lipschitz', 1.0)
    if isinstance(lipschitz, bool) or not isinstance(lipschitz, (int, float)):
        raise ParseError("expected a number", f"{where}.lipschitz")

    return LayerSpec(
        kind=kind,
        d_in=_require_int(entry['d_in'], f"{where}.d_in", 1),
        d_out=_require_int(entry['d_out'], f"{where}.d_out", 1),
        k=tuple(_require_int_list(entry.get('k', []), f"{where}.k")),
        stride=_require_int(entry.get('stride', 1), f"{where}.stride", 1),
        c_in=_require_int(entry.get('c_in', 1), f"{where}.c_in", 1),
        c_out=_require_int(entry.get('c_out', 1), f"{where}.c_out", 1),
        lipschitz=float(lipschitz),
        activation=activation,
        spatial=tuple(_require_int_list(entry.get('spatial', []), f"{where}.spatial")),
    )


def _parse_manifest(text: str) -> Dict[str, Any]:
    try:
        manifest = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, f"line {e.lineno}, column {e.colno}") from e
    if not isinstance(manifest, dict):
        raise ParseError("manifest must be a JSON object", "line 1, column 1")
    if manifest.get('format') != BUNDLE_FORMAT:
        raise ParseError(f"expected '{BUNDLE_FORMAT}'", "format")
    if manifest.get('version') != BUNDLE_VERSION:
        raise ParseError(f"unsupported version {json.dumps(manifest.get('version'))}", "version")
    for key in ('input_dim', 'layers', 'weights'):
        if key not in manifest:
            raise ParseError("missing field", key)
    if not isinstance(manifest['layers'], list):
        raise ParseError("expected a list", "layers")
    if not isinstance(manifest['weights'], list):
        raise ParseError("expected a list", "weights")
    return manifest


# ===== PAYLOADS =====

def _read_payload(entry, where: str, base: Path, rows: int, cols: int) -> np.ndarray:
    count = rows * cols
    if entry.get('file') is None:
        data = entry.get('data')
        if not isinstance(data, str):
            raise ParseError("inline payload needs a base64 'data' string", f"{where}.data")
        try:
            raw = base64.b64decode(data, validate=True)
        except binascii.Error as e:
            raise ParseError(f"invalid base64: {e}", f"{where}.data") from e
    else:
        if not isinstance(entry['file'], str):
            raise ParseError("expected a file name", f"{where}.file")
        offset = _require_int(entry.get('offset', 0), f"{where}.offset")
        path = base / entry['file']
        try:
            with open(path, 'rb') as f:
                f.seek(offset)
                raw = f.read(count * PAYLOAD_DTYPE.itemsize)
        except OSError as e:
            raise BundleIOError(f"cannot read payload {path}: {e}") from e

    if len(raw) != count * PAYLOAD_DTYPE.itemsize:
        raise ParseError(
            f"payload holds {len(raw)} bytes, {rows}x{cols} doubles need {count * PAYLOAD_DTYPE.itemsize}",
            where,
        )
    return np.frombuffer(raw, dtype=PAYLOAD_DTYPE).astype(np.float64).reshape(rows, cols)


def _payload_bytes(W: np.ndarray) -> bytes:
    return np.ascontiguousarray(W, dtype=PAYLOAD_DTYPE).tobytes()


# ===== LOAD / SAVE =====

def load_bundle(path: Union[str, Path]) -> NetBundle:
    """Read and validate a bundle

    Args:
        path: Manifest file

    Returns:
        NetBundle whose weights match every layer's declared shape

    Raises:
        ParseError: Malformed manifest (location in the message)
        InvalidNetwork: Well-formed manifest describing an invalid network
        ShapeMismatch: Payload dimensions differ from the layer (1-based index)
        NonFiniteWeight: Payload holds NaN or infinity
        BundleIOError: Manifest or payload cannot be read
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise BundleIOError(f"cannot read bundle {path}: {e}") from e

    manifest = _parse_manifest(text)
    input_dim = _require_int(manifest['input_dim'], 'input_dim', 1)
    layers = tuple(_parse_layer(entry, f"layers[{i}]") for i, entry in enumerate(manifest['layers']))
    spec = NetworkSpec(input_dim, layers)
    issues = validate(spec)
    if issues:
        raise InvalidNetwork(issues)

    if len(manifest['weights']) != len(layers):
        raise ParseError(f"{len(manifest['weights'])} payloads for {len(layers)} layers", "weights")

    weights = []
    for i, (layer, entry) in enumerate(zip(layers, manifest['weights']), start=1):
        where = f"weights[{i - 1}]"
        if not isinstance(entry, dict):
            raise ParseError("expected an object", where)
        for key in ('rows', 'cols'):
            if key not in entry:
                raise ParseError("missing field", f"{where}.{key}")
        rows = _require_int(entry['rows'], f"{where}.rows", 1)
        cols = _require_int(entry['cols'], f"{where}.cols", 1)
        expected = weight_shape(layer)
        if (rows, cols) != expected:
            raise ShapeMismatch(i, expected, (rows, cols))
        W = _read_payload(entry, where, path.parent, rows, cols)
        if not np.all(np.isfinite(W)):
            raise NonFiniteWeight(i)
        weights.append(W)

    logger.info("Loaded bundle %s (%d layers)", path, len(layers))
    return NetBundle(spec, tuple(weights))


def _check_bundle(bundle: NetBundle):
    issues = validate(bundle.spec)
    if issues:
        raise InvalidNetwork(issues)
    if len(bundle.weights) != bundle.spec.L:
        raise InvalidNetwork([f"{len(bundle.weights)} weight matrices for {bundle.spec.L} layers"])
    for i, (layer, W) in enumerate(zip(bundle.spec.layers, bundle.weights), start=1):
        expected = weight_shape(layer)
        actual = W.shape if W.ndim == 2 else (W.size, 1)
        if actual != expected:
            raise ShapeMismatch(i, expected, actual)
        if not np.all(np.isfinite(W)):
            raise NonFiniteWeight(i)


def save_bundle(bundle: NetBundle, path: Union[str, Path], inline: Optional[bool] = None) -> Path:
    """Write a bundle so that ``load_bundle`` returns it bit-exactly

    Args:
        bundle: Bundle to write; validated before anything touches disk
        path: Manifest file; a sidecar ``<stem>.bin`` goes next to it
        inline: Force inline (True) or sidecar (False) payloads; by default
            payloads are inlined when they total at most 64 KiB

    Returns:
        The manifest path
    """
    _check_bundle(bundle)
    path = Path(path)
    payloads = [_payload_bytes(W) for W in bundle.weights]
    if inline is None:
        inline = sum(len(p) for p in payloads) <= INLINE_LIMIT

    sidecar = path.with_suffix('.bin')
    entries = []
    offset = 0
    for W, payload in zip(bundle.weights, payloads):
        rows, cols = W.shape
        if inline:
            entries.append({'rows': rows, 'cols': cols, 'file': None,
                            'data': base64.b64encode(payload).decode('ascii')})
        else:
            entries.append({'rows': rows, 'cols': cols, 'file': sidecar.name, 'offset': offset})
            offset += len(payload)

    manifest = {
        'format': BUNDLE_FORMAT,
        'version': BUNDLE_VERSION,
        'input_dim': bundle.spec.input_dim,
        'layers': [_layer_manifest(layer) for layer in bundle.spec.layers],
        'weights': entries,
    }

    try:
        if not inline:
            sidecar.write_bytes(b''.join(payloads))
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + '\n', encoding='utf-8')
    except OSError as e:
        raise BundleIOError(f"cannot write bundle {path}: {e}") from e

    logger.info("Saved bundle %s (%d layers, %s payloads)", path, bundle.spec.L,
                'inline' if inline else 'sidecar')
    return path


# ===== WEIGHT GENERATION =====

@dataclass(frozen=True)
class WeightScale:
    """How generated weights are scaled: unit Frobenius norm per layer, or Gaussian(sigma)"""
    kind: str = 'unit_frobenius'
    sigma: float = 1.0

    def __str__(self) -> str:
        if self.kind == 'gaussian':
            return f"gaussian:{self.sigma:g}"
        return self.kind


def parse_scale_mode(text: Union[str, WeightScale]) -> WeightScale:
    """'unit_frobenius', 'gaussian' or 'gaussian:<sigma>'"""
    if isinstance(text, WeightScale):
        return text
    kind, _, sigma = str(text).strip().partition(':')
    if kind == 'unit_frobenius' and not sigma:
        return WeightScale('unit_frobenius')
    if kind == 'gaussian':
        if not sigma:
            return WeightScale('gaussian', 1.0)
        try:
            value = float(sigma)
        except ValueError:
            raise DomainError(f"gaussian sigma must be a number, got '{sigma}'")
        if not (value > 0 and math.isfinite(value)):
            raise DomainError(f"gaussian sigma must be positive, got {value}")
        return WeightScale('gaussian', value)
    raise DomainError(f"unknown scale mode '{text}', expected unit_frobenius, gaussian or gaussian:<sigma>")


def gen_weights(
    spec: NetworkSpec,
    seed: int,
    scale_mode: Union[str, WeightScale] = 'unit_frobenius'
) -> NetBundle:
    """Seeded random weights for every layer

    Layers draw from one SplitMix64 stream in order, row-major, as standard
    normals (Box-Muller) times sigma. ``unit_frobenius`` then rescales each
    layer to Frobenius norm 1.
    """
    issues = validate(spec)
    if issues:
        raise InvalidNetwork(issues)
    scale = parse_scale_mode(scale_mode)
    rng = SplitMix64(seed)

    weights = []
    for layer in spec.layers:
        rows, cols = weight_shape(layer)
        W = rng.matrix(rows, cols, scale.sigma)
        if scale.kind == 'unit_frobenius':
            norm = float(np.sqrt(np.sum(W * W)))
            W = W / norm if norm > 0 else np.full((rows, cols), 1.0 / math.sqrt(rows * cols))
        weights.append(W)

    logger.debug("Generated %d weight matrices (seed %d, %s)", len(weights), seed, scale)
    return NetBundle(spec, tuple(weights))


# ===== REFERENCE ARCHITECTURES =====

# Full-width pointwise channels and depthwise strides of the 13 separable blocks
MOBILENET_V1_CHANNELS = (64, 128, 128, 256, 256, 512, 512, 512, 512, 512, 512, 1024, 1024)
MOBILENET_V1_STRIDES = (1, 2, 1, 2, 1, 2, 1, 1, 1, 1, 1, 2, 1)


def mobilenet_v1_spec(
    width: float = 0.125,
    length: int = 224,
    in_channels: int = 4,
    classes: int = 10,
    k: int = 3
) -> NetworkSpec:
    """1-D MobileNet-V1-shaped stack: 13 depthwise + pointwise pairs and a linear head

    Args:
        width: Channel multiplier applied to the full-width pointwise channels
        length: Input length
        in_channels: Input channels
        classes: Outputs of the final fully connected layer
        k: Depthwise filter length

    Returns:
        NetworkSpec with 27 layers
    """
    if not width > 0:
        raise DomainError(f"width must be > 0, got {width}")
    layers = []
    channels, size = in_channels, length
    for full, stride in zip(MOBILENET_V1_CHANNELS, MOBILENET_V1_STRIDES):
        out_size = (size - k) // stride + 1
        if out_size < 1:
            raise DomainError(f"input length {length} is too short for the stride pattern")
        layers.append(LayerSpec(
            LayerKind.DEPTHWISE_CONV, channels * size, channels * out_size,
            k=(k,), stride=stride, c_in=channels, c_out=channels, spatial=(size,),
        ))
        out_channels = max(1, int(round(full * width)))
        layers.append(LayerSpec(
            LayerKind.POINTWISE_CONV, channels * out_size, out_channels * out_size,
            k=(1,), c_in=channels, c_out=out_channels, spatial=(out_size,),
        ))
        channels, size = out_channels, out_size
    layers.append(LayerSpec(
        LayerKind.FULLY_CONNECTED, channels * size, classes, activation=Activation.IDENTITY,
    ))
    return NetworkSpec(in_channels * length, tuple(layers))


# (expansion t, full-width output channels, repeats, first stride) of the 7 bottleneck stages
MOBILENET_V2_STAGES = (
    (1, 16, 1, 1), (6, 24, 2, 2), (6, 32, 3, 2), (6, 64, 4, 2),
    (6, 96, 3, 1), (6, 160, 3, 2), (6, 320, 1, 1),
)
MOBILENET_V2_LAST_CHANNELS = 1280


def mobilenet_v2_spec(
    width: float = 0.125,
    length: int = 320,
    in_channels: int = 4,
    classes: int = 10,
    k: int = 3
) -> NetworkSpec:
    """1-D MobileNet-V2-shaped stack of inverted bottlenecks without residual connections

    Each bottleneck is a pointwise expansion (skipped when t = 1), a depthwise
    filter and a linear pointwise projection. A final pointwise layer and a
    linear head follow. Windows are unpadded, so inputs shorter than about 250
    run out of length before the last stage.

    Returns:
        NetworkSpec with 52 layers
    """
    if not width > 0:
        raise DomainError(f"width must be > 0, got {width}")
    layers = []
    channels, size = in_channels, length

    def pointwise(c_out, activation):
        layers.append(LayerSpec(
            LayerKind.POINTWISE_CONV, channels * size, c_out * size,
            k=(1,), c_in=channels, c_out=c_out, spatial=(size,), activation=activation,
        ))

    for t, full, repeats, first_stride in MOBILENET_V2_STAGES:
        out_channels = max(1, int(round(full * width)))
        for i in range(repeats):
            stride = first_stride if i == 0 else 1
            if t != 1:
                pointwise(channels * t, Activation.RELU)
                channels *= t
            out_size = (size - k) // stride + 1
            if out_size < 1:
                raise DomainError(f"input length {length} is too short for the stride pattern")
            layers.append(LayerSpec(
                LayerKind.DEPTHWISE_CONV, channels * size, channels * out_size,
                k=(k,), stride=stride, c_in=channels, c_out=channels, spatial=(size,),
            ))
            size = out_size
            pointwise(out_channels, Activation.IDENTITY)
            channels = out_channels
    pointwise(max(1, int(round(MOBILENET_V2_LAST_CHANNELS * width))), Activation.RELU)
    channels = layers[-1].c_out
    layers.append(LayerSpec(
        LayerKind.FULLY_CONNECTED, channels * size, classes, activation=Activation.IDENTITY,
    ))
    return NetworkSpec(in_channels * length, tuple(layers))


def worked_example_spec() -> NetworkSpec:
    """A 2x2 filter over a 3x4 single-channel input at stride 1 (six outputs)"""
    return NetworkSpec(12, (
        LayerSpec(LayerKind.STANDARD_CONV, 12, 6, k=(2, 2), spatial=(3, 4),
                  activation=Activation.IDENTITY),
    ))


def mixed_spec() -> NetworkSpec:
    """Standard, depthwise, pointwise and fully connected layers in one small net"""
    return NetworkSpec(16, (
        LayerSpec(LayerKind.STANDARD_CONV, 16, 18, k=(3,), c_in=2, c_out=3, spatial=(8,)),
        LayerSpec(LayerKind.DEPTHWISE_CONV, 18, 9, k=(2,), stride=2, c_in=3, c_out=3, spatial=(6,)),
        LayerSpec(LayerKind.POINTWISE_CONV, 9, 6, k=(1,), c_in=3, c_out=2, spatial=(3,)),
        LayerSpec(LayerKind.FULLY_CONNECTED, 6, 3, activation=Activation.IDENTITY),
    ))


ARCHITECTURES: Dict[str, Callable[[], NetworkSpec]] = {
    'mobilenet_v1': mobilenet_v1_spec,
    'mobilenet_v2': mobilenet_v2_spec,
    'worked_example': worked_example_spec,
    'mixed': mixed_spec,
}


def architecture_spec(name: str) -> NetworkSpec:
    try:
        return ARCHITECTURES[name]()
    except KeyError:
        raise DomainError(f"unknown architecture '{name}', expected one of {sorted(ARCHITECTURES)}")
