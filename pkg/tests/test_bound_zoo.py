"""Six-family bound comparison"""

import math

import numpy as np
import pytest

from lib.bound_zoo import (
    architecture_comparison,
    family_bound,
    fcnn_bounds,
    fnn_bounds,
    simplified_fcnn_bounds,
    simplified_fnn_bounds,
)
from lib.bundle import gen_weights, mixed_spec, mobilenet_v1_spec, mobilenet_v2_spec
from lib.errors import DomainError, ZeroSpectralNorm
from lib.types import BoundFamily, LayerNorms, NormMode

UNIT = LayerNorms(a=1.0, s=1.0, n21=1.0)
EXPONENTIAL_FAMILIES = {BoundFamily.NEYSHABUR15, BoundFamily.GOLOWICH18}


def log10_values(report):
    return {b.family: b.log10_value for b in report.bounds}


def random_norms(rng, L, width):
    norms = []
    for _ in range(L):
        a = float(rng.uniform(1.0, 4.0))
        s = float(rng.uniform(0.3, 1.0)) * a
        norms.append(LayerNorms(a=a, s=s, n21=a * math.sqrt(width)))
    return norms


class TestSingleLayer:
    """All norms and sizes equal to 1"""

    def test_fnn(self):
        report = fnn_bounds([UNIT], d_max=1, L=1, n=1)
        assert report.get(BoundFamily.NEYSHABUR15).value == pytest.approx(2.0)
        assert report.get(BoundFamily.GOLOWICH18).value == pytest.approx(1.0)
        assert report.get(BoundFamily.LI18).value == pytest.approx(1.0)
        assert report.get(BoundFamily.OURS).value == pytest.approx(1.0)

    def test_fcnn(self):
        report = fcnn_bounds([UNIT], c=1, m=1, r=1, L=1, n=1)
        assert report.get(BoundFamily.NEYSHABUR15).value == pytest.approx(2.0)
        assert report.get(BoundFamily.OURS).value == pytest.approx(1.0)

    def test_ranking_ties_follow_family_order(self):
        ranking = fnn_bounds([UNIT], d_max=1, L=1, n=1).ranking()
        assert ranking == (
            BoundFamily.BARTLETT_SPECTRAL17, BoundFamily.NEYSHABUR_PAC17, BoundFamily.GOLOWICH18,
            BoundFamily.LI18, BoundFamily.OURS, BoundFamily.NEYSHABUR15,
        )

    def test_report_fields(self):
        report = fnn_bounds([UNIT], d_max=1, L=1, n=7)
        assert report.n == 7
        assert not report.ignore_n
        assert len(report.bounds) == 6
        assert report.note


class TestScaling:
    """Homogeneity in the weight scale and the sample-count rate"""

    @pytest.mark.parametrize("t", [0.5, 2.0])
    def test_homogeneity_fnn(self, rng, t):
        norms = random_norms(rng, 4, 10)
        base = log10_values(fnn_bounds(norms, d_max=10, L=4, n=50))
        scaled = log10_values(fnn_bounds([n.scaled(t) for n in norms], d_max=10, L=4, n=50))
        for family in BoundFamily:
            degree = 1.0 if family is BoundFamily.OURS else 4.0
            assert scaled[family] - base[family] == pytest.approx(degree * math.log10(t), abs=1e-9)

    @pytest.mark.parametrize("t", [0.5, 2.0])
    def test_homogeneity_fcnn(self, rng, t):
        norms = random_norms(rng, 3, 6)
        base = log10_values(fcnn_bounds(norms, c=2, m=3, r=4, L=3, n=50))
        scaled = log10_values(fcnn_bounds([n.scaled(t) for n in norms], c=2, m=3, r=4, L=3, n=50))
        for family in BoundFamily:
            degree = 0.75 if family is BoundFamily.OURS else 3.0
            assert scaled[family] - base[family] == pytest.approx(degree * math.log10(t), abs=1e-9)

    def test_quadrupling_n_halves(self, rng):
        norms = random_norms(rng, 3, 8)
        small = log10_values(fnn_bounds(norms, d_max=8, L=3, n=100))
        large = log10_values(fnn_bounds(norms, d_max=8, L=3, n=400))
        for family in BoundFamily:
            assert large[family] - small[family] == pytest.approx(-math.log10(2.0), abs=1e-9)


class TestSimplifiedForms:
    """Closed forms agree with the general evaluators under uniform norms"""

    @pytest.mark.parametrize("L", [1, 2, 5, 12])
    def test_fnn(self, L):
        a, s, d, n = 2.5, 1.5, 16, 1000
        norms = [LayerNorms(a=a, s=s, n21=a * math.sqrt(d))] * L
        general = log10_values(fnn_bounds(norms, d_max=d, L=L, n=n))
        simplified = log10_values(simplified_fnn_bounds(a, s, d, L, n))
        for family in BoundFamily:
            assert general[family] == pytest.approx(simplified[family], abs=1e-9)

    @pytest.mark.parametrize("L", [1, 3, 8])
    def test_fcnn(self, L):
        a, s, c, m, r, n = 1.7, 1.2, 4, 9, 6, 500
        norms = [LayerNorms(a=a, s=s, n21=a * m * math.sqrt(c))] * L
        general = log10_values(fcnn_bounds(norms, c=c, m=m, r=r, L=L, n=n))
        simplified = log10_values(simplified_fcnn_bounds(a, s, c, m, r, L, n))
        for family in BoundFamily:
            assert general[family] == pytest.approx(simplified[family], abs=1e-9)

    def test_simplified_has_no_mode(self):
        assert simplified_fnn_bounds(1.0, 1.0, 1, 1, 1).mode is None

    def test_depth_sweep_ordering(self):
        for L in range(5, 51):
            for report in (simplified_fnn_bounds(1.0, 1.0, 1, L, 1),
                           simplified_fcnn_bounds(1.0, 1.0, 1, 1, 1, L, 1)):
                values = log10_values(report)
                assert values[BoundFamily.OURS] <= values[BoundFamily.BARTLETT_SPECTRAL17]
                assert values[BoundFamily.OURS] <= values[BoundFamily.NEYSHABUR15]

    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            simplified_fnn_bounds(0.0, 1.0, 1, 1, 1)


class TestOverflow:
    def test_huge_norms(self):
        norms = [LayerNorms(a=1e300, s=1e300, n21=1e300)] * 3
        report = fnn_bounds(norms, d_max=1, L=3, n=1)
        li = report.get(BoundFamily.LI18)
        assert li.overflow
        assert li.value == math.inf
        assert li.log10_value == pytest.approx(900.0 + 0.5 * math.log10(3.0))
        assert math.isfinite(report.get(BoundFamily.OURS).value)
        assert report.bounds[-1].overflow

    def test_zero_value(self):
        bound = family_bound(BoundFamily.OURS, -math.inf)
        assert (bound.value, bound.overflow) == (0.0, False)

    def test_zero_spectral_norm(self):
        with pytest.raises(ZeroSpectralNorm):
            fnn_bounds([LayerNorms(a=1.0, s=0.0, n21=1.0)], d_max=1, L=1, n=1)

    def test_layer_count_checked(self):
        with pytest.raises(DomainError):
            fnn_bounds([UNIT, UNIT], d_max=1, L=3, n=1)


class TestArchitectureComparison:
    """End-to-end comparison on generated bundles"""

    @pytest.mark.parametrize("build", [mobilenet_v1_spec, mobilenet_v2_spec])
    def test_mobilenet_ordering(self, build):
        bundle = gen_weights(build(), seed=0, scale_mode='gaussian:1.0')
        report = architecture_comparison(bundle.spec, bundle.weights, NormMode.BOUNDED, ignore_n=True)
        values = log10_values(report)
        ours = values[BoundFamily.OURS]
        assert all(ours < v for family, v in values.items() if family is not BoundFamily.OURS)
        assert set(report.ranking()[-2:]) == EXPONENTIAL_FAMILIES
        assert report.ranking()[0] is BoundFamily.OURS

    def test_deterministic(self):
        bundle = gen_weights(mixed_spec(), seed=3)
        first = architecture_comparison(bundle.spec, bundle.weights)
        second = architecture_comparison(bundle.spec, bundle.weights)
        assert first.bounds == second.bounds

    def test_exact_never_exceeds_bounded(self):
        for seed in range(5):
            bundle = gen_weights(mixed_spec(), seed=seed, scale_mode='gaussian')
            exact = log10_values(architecture_comparison(bundle.spec, bundle.weights, NormMode.EXACT))
            bounded = log10_values(architecture_comparison(bundle.spec, bundle.weights, NormMode.BOUNDED))
            for family in BoundFamily:
                assert exact[family] <= bounded[family] + 1e-9

    def test_sample_count(self):
        bundle = gen_weights(mixed_spec(), seed=1)
        ignored = architecture_comparison(bundle.spec, bundle.weights, ignore_n=True, n=100)
        used = architecture_comparison(bundle.spec, bundle.weights, ignore_n=False, n=100)
        assert ignored.n == 1 and ignored.ignore_n
        assert used.n == 100
        shift = log10_values(ignored)[BoundFamily.LI18] - log10_values(used)[BoundFamily.LI18]
        assert shift == pytest.approx(1.0)

    def test_layers_in_report(self):
        bundle = gen_weights(mixed_spec(), seed=2)
        report = architecture_comparison(bundle.spec, bundle.weights, NormMode.EXACT)
        assert report.mode is NormMode.EXACT
        assert len(report.layers) == 4
        assert np.isclose(report.layers[0].a, 1.0)
