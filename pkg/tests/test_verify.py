"""Randomized oracle suite"""

import math

import numpy as np
import pytest

from lib.bundle import gen_weights, mixed_spec
from lib.complexity import covering_ball_bound
from lib.errors import DomainError
from lib.verify import PROPERTIES, check_bundle_layers, check_property, greedy_cover_count, run_suite


class TestSuite:
    def test_all_properties_pass(self):
        results = run_suite(trials=25, seed=0)
        assert [r.name for r in results] == [name for name, _, _ in PROPERTIES]
        failed = [r.name for r in results if not r.passed]
        assert failed == []

    def test_with_bundle(self):
        bundle = gen_weights(mixed_spec(), seed=0, scale_mode='gaussian')
        results = run_suite(trials=5, seed=1, bundle=bundle)
        assert results[-1].name == 'bundle_layers'
        assert results[-1].trials == 4
        assert all(r.passed for r in results)

    def test_deterministic(self):
        first = run_suite(trials=5, seed=7)
        second = run_suite(trials=5, seed=7)
        assert [r.max_error for r in first] == [r.max_error for r in second]

    def test_rejects_zero_trials(self):
        with pytest.raises(DomainError):
            run_suite(trials=0)


class TestCheckProperty:
    def test_counts_violations(self):
        result = check_property('always_off', lambda rng: 1.0, trials=3, tolerance=0.5, seed=0)
        assert (result.violations, result.max_error, result.passed) == (3, 1.0, False)

    def test_passes_within_tolerance(self):
        result = check_property('exact', lambda rng: 0.0, trials=3, tolerance=0.0, seed=0)
        assert result.passed

    def test_bundle_layers(self):
        result = check_bundle_layers(gen_weights(mixed_spec(), seed=2), seed=3)
        assert result.passed


class TestGreedyCover:
    def test_line(self):
        assert greedy_cover_count(np.arange(10.0), 1.0) == 5

    def test_single_point(self):
        assert greedy_cover_count([[1.0, 2.0]], 0.1) == 1

    def test_within_ball_covering_bound(self, rng):
        P = rng.standard_normal((500, 3))
        P *= (rng.uniform(0.0, 1.0, size=(500, 1)) / np.linalg.norm(P, axis=1, keepdims=True))
        count = greedy_cover_count(P, 1.0)
        assert count <= math.exp(covering_ball_bound(3, 1.0, 1.0)) + 1e-9

    def test_rejects_zero_eps(self):
        with pytest.raises(DomainError):
            greedy_cover_count([[0.0]], 0.0)
