"""Network validation, forward evaluation and per-layer norms"""

import dataclasses
import math

import numpy as np
import pytest

from lib.errors import DimensionMismatch, InvalidNetwork, OracleTooLarge
from lib.network import (
    apply_layer,
    check_network,
    effective_matrix,
    forward,
    layer_norms,
    lipschitz_product,
    max_width,
    network_norms,
    outputs_per_filter,
    validate,
    weight_shape,
)
from lib.linalg import frobenius_norm, spectral_norm_dense_oracle
from lib.types import Activation, LayerKind, LayerSpec, NetworkSpec, NormMode


def fc(d_in, d_out, activation=Activation.RELU, lipschitz=1.0):
    return LayerSpec(LayerKind.FULLY_CONNECTED, d_in, d_out, activation=activation, lipschitz=lipschitz)


def small_conv_net():
    """Standard, depthwise and pointwise conv followed by an FC head"""
    return NetworkSpec(9, (
        LayerSpec(LayerKind.STANDARD_CONV, 9, 14, k=3, c_in=1, c_out=2, spatial=(9,)),
        LayerSpec(LayerKind.DEPTHWISE_CONV, 14, 6, k=3, stride=2, c_in=2, c_out=2, spatial=(7,)),
        LayerSpec(LayerKind.POINTWISE_CONV, 6, 9, c_in=2, c_out=3, spatial=(3,)),
        fc(9, 4, activation=Activation.IDENTITY),
    ))


def linear_conv_net():
    return NetworkSpec(9, tuple(
        dataclasses.replace(layer, activation=Activation.IDENTITY) for layer in small_conv_net().layers
    ))


def random_weights(spec, rng):
    return [rng.standard_normal(weight_shape(layer)) for layer in spec.layers]


class TestValidate:
    """validate reports every violation with its layer"""

    def test_valid_fc(self):
        assert validate(NetworkSpec(4, (fc(4, 3), fc(3, 2)))) == []

    def test_valid_conv(self):
        assert validate(small_conv_net()) == []

    def test_empty(self):
        assert validate(NetworkSpec(4, ())) == ["L must be >= 1"]

    def test_chain_mismatch(self):
        issues = validate(NetworkSpec(4, (fc(4, 3), fc(5, 2))))
        assert issues == ["layer 2: d_in 5 does not match layer 1 d_out 3"]

    def test_first_layer_against_input(self):
        issues = validate(NetworkSpec(6, (fc(4, 3),)))
        assert issues == ["layer 1: d_in 4 does not match input_dim 6"]

    def test_relu_lipschitz(self):
        issues = validate(NetworkSpec(2, (fc(2, 2, lipschitz=2.0),)))
        assert len(issues) == 1
        assert issues[0].startswith("layer 1: relu")

    def test_identity_any_lipschitz(self):
        assert validate(NetworkSpec(2, (fc(2, 2, Activation.IDENTITY, 2.0),))) == []

    def test_conv_output_dimension(self):
        layer = LayerSpec(LayerKind.STANDARD_CONV, 8, 7, k=3, c_in=1, c_out=1)
        issues = validate(NetworkSpec(8, (layer,)))
        assert issues == ["layer 1: d_out 7 != m x c_out = 6 x 1 = 6"]

    def test_depthwise_channels(self):
        layer = LayerSpec(LayerKind.DEPTHWISE_CONV, 8, 6, k=2, stride=2, c_in=2, c_out=3)
        assert any("c_in = c_out" in issue for issue in validate(NetworkSpec(8, (layer,))))

    def test_filter_too_large(self):
        layer = LayerSpec(LayerKind.STANDARD_CONV, 3, 1, k=4, c_in=1, c_out=1)
        assert len(validate(NetworkSpec(3, (layer,)))) == 1

    def test_collects_several(self):
        spec = NetworkSpec(4, (fc(4, 3, lipschitz=3.0), fc(2, 2)))
        assert len(validate(spec)) == 2

    def test_check_network_raises(self):
        with pytest.raises(InvalidNetwork) as info:
            check_network(NetworkSpec(4, (fc(5, 2),)), [np.ones((2, 5))])
        assert info.value.violations == ["layer 1: d_in 5 does not match input_dim 4"]

    def test_check_network_weight_shape(self):
        with pytest.raises(DimensionMismatch, match="layer 1"):
            check_network(NetworkSpec(4, (fc(4, 2),)), [np.ones((4, 2))])


class TestGeometry:
    def test_outputs_per_filter(self):
        spec = small_conv_net()
        assert [outputs_per_filter(layer) for layer in spec.layers] == [7, 3, 3, 1]

    def test_weight_shapes(self):
        spec = small_conv_net()
        assert [weight_shape(layer) for layer in spec.layers] == [(2, 3), (2, 3), (3, 2), (4, 9)]

    def test_effective_matrix_shapes(self, rng):
        spec = small_conv_net()
        for layer, W in zip(spec.layers, random_weights(spec, rng)):
            assert effective_matrix(layer, W).shape == (layer.d_out, layer.d_in)

    def test_apply_layer_matches_matrix(self, rng):
        spec = small_conv_net()
        for layer, W in zip(spec.layers, random_weights(spec, rng)):
            Z = rng.standard_normal((layer.d_in, 3))
            np.testing.assert_allclose(apply_layer(layer, W, Z), effective_matrix(layer, W) @ Z, atol=1e-12)

    def test_width_and_lipschitz(self):
        spec = NetworkSpec(2, (fc(2, 5, Activation.IDENTITY, 0.5), fc(5, 3, Activation.IDENTITY, 4.0)))
        assert max_width(spec) == 5
        assert lipschitz_product(spec) == 2.0


class TestForward:
    def test_identity_activations_compose_matrices(self, rng):
        spec = linear_conv_net()
        weights = random_weights(spec, rng)
        X = rng.standard_normal((spec.input_dim, 5))
        product = np.eye(spec.input_dim)
        for layer, W in zip(spec.layers, weights):
            product = effective_matrix(layer, W) @ product
        np.testing.assert_allclose(forward(spec, weights, X), product @ X, rtol=1e-12, atol=1e-12)

    def test_two_layer_scalar_loops(self, rng):
        spec = NetworkSpec(5, (fc(5, 4), fc(4, 3)))
        W1, W2 = random_weights(spec, rng)
        X = rng.standard_normal((5, 6))
        expected = np.zeros((3, 6))
        for col in range(6):
            hidden = [0.0] * 4
            for i in range(4):
                total = 0.0
                for j in range(5):
                    total += W1[i, j] * X[j, col]
                hidden[i] = max(total, 0.0)
            for p in range(3):
                total = 0.0
                for i in range(4):
                    total += W2[p, i] * hidden[i]
                expected[p, col] = max(total, 0.0)
        np.testing.assert_allclose(forward(spec, [W1, W2], X), expected, rtol=1e-12, atol=1e-12)

    def test_identity_network(self, rng):
        spec = NetworkSpec(3, (fc(3, 3), fc(3, 3)))
        X = np.abs(rng.standard_normal((3, 4)))
        np.testing.assert_array_equal(forward(spec, [np.eye(3), np.eye(3)], X), X)

    def test_relu_clips(self):
        spec = NetworkSpec(2, (fc(2, 2),))
        out = forward(spec, [-np.eye(2)], np.ones((2, 3)))
        np.testing.assert_array_equal(out, np.zeros((2, 3)))

    def test_identity_activation_keeps_sign(self):
        spec = NetworkSpec(2, (fc(2, 2, Activation.IDENTITY),))
        np.testing.assert_array_equal(forward(spec, [-np.eye(2)], np.ones((2, 1))), -np.ones((2, 1)))

    def test_input_rows_checked(self):
        with pytest.raises(DimensionMismatch):
            forward(NetworkSpec(2, (fc(2, 2),)), [np.eye(2)], np.ones((3, 1)))

    def test_output_norm_bounded_by_spectral_product(self, rng):
        spec = small_conv_net()
        for _ in range(20):
            weights = random_weights(spec, rng)
            X = rng.standard_normal((9, 5))
            norms = network_norms(spec, weights)
            bound = frobenius_norm(X) * math.prod(layer.lipschitz * layer.s for layer in norms)
            assert frobenius_norm(forward(spec, weights, X)) <= bound * (1 + 1e-10)


class TestLayerNorms:
    def test_fc_identity(self):
        norms = layer_norms(fc(3, 3), np.eye(3))
        assert norms.a == pytest.approx(math.sqrt(3))
        assert norms.s == pytest.approx(1.0)
        assert norms.n21 == pytest.approx(3.0)
        assert norms.gamma_fnorm == pytest.approx(math.sqrt(3))

    def test_fc_bounded(self):
        norms = layer_norms(fc(3, 3), np.eye(3), NormMode.BOUNDED)
        assert norms.s == pytest.approx(1.0)
        assert norms.n21 == pytest.approx(3.0)

    def test_pointwise_exact_equals_bounded(self, rng):
        layer = small_conv_net().layers[2]
        W = rng.standard_normal((3, 2))
        exact = layer_norms(layer, W, NormMode.EXACT)
        bounded = layer_norms(layer, W, NormMode.BOUNDED)
        assert exact.s == pytest.approx(bounded.s, rel=1e-10)

    def test_exact_never_exceeds_bounded(self, rng):
        spec = small_conv_net()
        for _ in range(20):
            weights = random_weights(spec, rng)
            for layer, W in zip(spec.layers, weights):
                exact = layer_norms(layer, W, NormMode.EXACT)
                bounded = layer_norms(layer, W, NormMode.BOUNDED)
                assert exact.s <= bounded.s * (1 + 1e-10)
                assert exact.n21 <= bounded.n21 * (1 + 1e-10)
                assert exact.gamma_fnorm == pytest.approx(bounded.gamma_fnorm, rel=1e-10)

    def test_exact_s_matches_oracle(self, rng):
        spec = small_conv_net()
        for layer, W in zip(spec.layers, random_weights(spec, rng)):
            expected = spectral_norm_dense_oracle(effective_matrix(layer, W))
            assert layer_norms(layer, W).s == pytest.approx(expected, rel=1e-10)

    def test_tight_depthwise(self):
        layer = LayerSpec(LayerKind.DEPTHWISE_CONV, 8, 4, k=2, stride=2, c_in=2, c_out=2)
        W = np.array([[3.0, 4.0], [0.0, 1.0]])
        assert layer_norms(layer, W, NormMode.BOUNDED).s == pytest.approx(math.sqrt(26.0))
        assert layer_norms(layer, W, NormMode.BOUNDED, tight_depthwise=True).s == pytest.approx(5.0)
        assert layer_norms(layer, W).s == pytest.approx(5.0)

    def test_descriptors(self):
        norms = layer_norms(small_conv_net().layers[0], np.ones((2, 3)))
        assert (norms.kind, norms.channels, norms.filter_dim, norms.outputs) == (LayerKind.STANDARD_CONV, 2, 3, 7)

    def test_oracle_cap(self, monkeypatch):
        layer = small_conv_net().layers[0]
        monkeypatch.setenv("CONVBOUND_ORACLE_CAP", "2")
        with pytest.raises(OracleTooLarge):
            layer_norms(layer, np.ones((2, 3)))
        assert layer_norms(layer, np.ones((2, 3)), NormMode.BOUNDED).a == pytest.approx(math.sqrt(6))
