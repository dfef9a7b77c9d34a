import math

import numpy as np
import pytest

from slopeseg import ConfigError, Segmentation, StateGrid, TimeSeries
from slopeseg.core import (
    build_prefix_sums,
    extend_value,
    segment_cost_fast,
    segment_cost_naive,
)


class TestTimeSeries:
    def test_values_coerced_to_float64(self):
        ts = TimeSeries([1, 2, 3])
        assert ts.values.dtype == np.float64
        assert ts.n == 3

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            TimeSeries([])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            TimeSeries([1.0, math.nan])
        with pytest.raises(ValueError):
            TimeSeries([1.0, math.inf])

    def test_rejects_2d(self):
        with pytest.raises(ValueError):
            TimeSeries(np.zeros((2, 2)))


class TestStateGrid:
    def test_strictly_increasing_required(self):
        with pytest.raises(ValueError):
            StateGrid([0.0, 0.0, 1.0])
        with pytest.raises(ValueError):
            StateGrid([1.0, 0.0])

    def test_from_range_inclusive(self):
        g = StateGrid.from_range(0.0, 4.0, 2.0)
        assert np.array_equal(g.states, [0.0, 2.0, 4.0])
        assert g.m == 3

    def test_from_range_endpoint_not_on_step(self):
        g = StateGrid.from_range(0.0, 5.0, 2.0)
        assert g.states[-1] <= 5.0
        assert np.array_equal(g.states, [0.0, 2.0, 4.0])

    def test_from_range_rejects_bad_step(self):
        with pytest.raises(ConfigError):
            StateGrid.from_range(0.0, 4.0, 0.0)
        with pytest.raises(ConfigError):
            StateGrid.from_range(4.0, 0.0, 1.0)

    def test_nearest_index_ties_take_lower(self):
        g = StateGrid([0.0, 2.0, 4.0])
        assert g.nearest_index(1.0) == 0
        assert g.nearest_index(3.0) == 1
        assert g.nearest_index(-50.0) == 0
        assert g.nearest_index(50.0) == 2


class TestPrefixSums:
    def test_small_example(self):
        ps = build_prefix_sums(TimeSeries([1.0, 2.0, 3.0]))
        assert np.allclose(ps.s1, [0.0, 1.0, 3.0, 6.0])
        assert np.allclose(ps.s2, [0.0, 1.0, 5.0, 14.0])
        assert np.allclose(ps.sp, [0.0, 1.0, 5.0, 14.0])
        assert ps.n == 3

    def test_zero_series(self):
        ps = build_prefix_sums(TimeSeries([0.0, 0.0]))
        assert np.all(ps.s1 == 0.0)
        assert np.all(ps.s2 == 0.0)
        assert np.all(ps.sp == 0.0)

    def test_matches_direct_summation(self, rng):
        y = rng.normal(size=50)
        ps = build_prefix_sums(y)
        t = np.arange(1, 51, dtype=float)
        for k in (1, 17, 50):
            assert math.isclose(ps.s1[k], y[:k].sum(), rel_tol=1e-12, abs_tol=1e-12)
            assert math.isclose(ps.s2[k], (y[:k] ** 2).sum(), rel_tol=1e-12, abs_tol=1e-12)
            assert math.isclose(ps.sp[k], (t[:k] * y[:k]).sum(), rel_tol=1e-12, abs_tol=1e-12)


class TestSegmentCost:
    def test_exact_linear_fit_is_zero(self):
        y = np.array([1.0, 2.0, 3.0, 4.0])
        ps = build_prefix_sums(y)
        assert segment_cost_naive(y, 0, 4, 0.0, 4.0) == pytest.approx(0.0, abs=1e-12)
        assert segment_cost_fast(ps, 0, 4, 0.0, 4.0) == pytest.approx(0.0, abs=1e-12)

    def test_flat_mismatch(self):
        # y = (1, 1) against the zero segment costs 1^2 + 1^2
        y = np.array([1.0, 1.0])
        assert segment_cost_naive(y, 0, 2, 0.0, 0.0) == pytest.approx(2.0)
        assert segment_cost_fast(build_prefix_sums(y), 0, 2, 0.0, 0.0) == pytest.approx(2.0)

    def test_exact_ramp(self):
        y = np.array([1.0, 2.0])
        assert segment_cost_naive(y, 0, 2, 0.0, 2.0) == pytest.approx(0.0, abs=1e-12)

    def test_single_point_sees_only_endpoint(self):
        # a one-point segment fits y_t against v alone; u is irrelevant
        y = np.array([3.0, 7.0, 3.0])
        ps = build_prefix_sums(y)
        assert segment_cost_fast(ps, 1, 2, -100.0, 7.0) == pytest.approx(0.0, abs=1e-9)
        assert segment_cost_naive(y, 1, 2, 0.0, 7.0) == pytest.approx(0.0, abs=1e-12)

    def test_fast_matches_naive_randomized(self, rng):
        y = rng.normal(0.0, 5.0, size=60)
        ps = build_prefix_sums(y)
        for _ in range(1000):
            tau = int(rng.integers(0, 60))
            t = int(rng.integers(tau + 1, 61))
            u = float(rng.uniform(-8, 8))
            v = float(rng.uniform(-8, 8))
            a = segment_cost_naive(y, tau, t, u, v)
            b = segment_cost_fast(ps, tau, t, u, v)
            assert math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-9)

    def test_nonnegative(self, rng):
        y = rng.normal(size=30)
        ps = build_prefix_sums(y)
        for _ in range(200):
            tau = int(rng.integers(0, 30))
            t = int(rng.integers(tau + 1, 31))
            u, v = rng.uniform(-5, 5, size=2)
            assert segment_cost_fast(ps, tau, t, float(u), float(v)) >= -1e-9

    def test_scale_and_shift(self, rng):
        y = rng.normal(size=20)
        a, c = 3.0, -2.5
        y2 = a * y + c
        for _ in range(100):
            tau = int(rng.integers(0, 20))
            t = int(rng.integers(tau + 1, 21))
            u, v = (float(x) for x in rng.uniform(-4, 4, size=2))
            base = segment_cost_naive(y, tau, t, u, v)
            scaled = segment_cost_naive(y2, tau, t, a * u + c, a * v + c)
            assert math.isclose(scaled, a * a * base, rel_tol=1e-9, abs_tol=1e-9)

    def test_invalid_range_raises(self):
        y = np.array([1.0, 2.0])
        ps = build_prefix_sums(y)
        with pytest.raises(ValueError):
            segment_cost_naive(y, 1, 1, 0.0, 0.0)
        with pytest.raises(ValueError):
            segment_cost_naive(y, -1, 2, 0.0, 0.0)
        with pytest.raises(ValueError):
            segment_cost_fast(ps, 0, 3, 0.0, 0.0)

    def test_extend_value_decomposition(self, rng):
        y = rng.normal(size=25)
        ps = build_prefix_sums(y)
        beta = 1.7
        for _ in range(200):
            tau = int(rng.integers(0, 25))
            t = int(rng.integers(tau + 1, 26))
            u, v = (float(x) for x in rng.uniform(-4, 4, size=2))
            acc = float(rng.uniform(-10, 10))
            got = extend_value(acc, tau, t, u, v, ps, beta)
            want = acc + segment_cost_fast(ps, tau, t, u, v) + beta
            assert math.isclose(got, want, rel_tol=1e-9, abs_tol=1e-9)


class TestSegmentation:
    def test_fields_and_counts(self):
        seg = Segmentation(changepoints=(4, 8), states=(0.0, 4.0, 0.0), objective=0.1)
        assert seg.segment_count == 2
        assert seg.changepoints[-1] == 8

    def test_slopes(self):
        seg = Segmentation(changepoints=(4, 8), states=(0.0, 4.0, 0.0), objective=0.1)
        assert seg.slopes() == pytest.approx([1.0, -1.0])

    def test_validation(self):
        with pytest.raises(ValueError):
            Segmentation(changepoints=(4, 8), states=(0.0, 4.0), objective=0.0)
        with pytest.raises(ValueError):
            Segmentation(changepoints=(8, 4), states=(0.0, 4.0, 0.0), objective=0.0)
