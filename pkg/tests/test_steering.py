import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_smooth
from rovercv.steering import AngleSeries, bin_angle, smooth_series


def series(values):
    values = np.asarray(values, dtype=np.float64)
    return AngleSeries(values, tuple(str(i) for i in range(len(values))))


def total_variation(values):
    return float(np.abs(np.diff(values)).sum())


class TestBinAngle:
    def test_zero_is_fixed(self):
        for width in (0.5, 1, 2, 7.3):
            assert bin_angle(0.0, width) == 0.0

    def test_half_rounds_away_from_zero(self):
        assert bin_angle(3.1, 2) == 4.0   # 3.1/2 = 1.55 -> 2 ticks
        assert bin_angle(-3.1, 2) == -4.0
        assert bin_angle(1.0, 2) == 2.0   # exactly half a bin rounds up
        assert bin_angle(-1.0, 2) == -2.0

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            bin_angle(90.5)
        with pytest.raises(ValueError):
            bin_angle(10.0, bin_width=0)

    def test_clamped_to_limits(self):
        assert bin_angle(89.9, 7) == 90.0  # 13 ticks * 7 = 91 -> clamp

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-90, 90), st.floats(0.1, 30))
    def test_idempotent(self, a, width):
        once = bin_angle(a, width)
        assert bin_angle(once, width) == once


class TestSmoothSeries:
    def test_lambda_zero_identity(self):
        rng = np.random.default_rng(0)
        s = series(rng.uniform(-90, 90, 25))
        out = smooth_series(s, 0.0)
        assert (out.angles == s.angles).all()
        assert out.frame_ids == s.frame_ids

    def test_constant_series_unchanged(self):
        s = series(np.full(12, 17.5))
        for lam in (0.1, 5.0, 1e5):
            assert smooth_series(s, lam).angles == pytest.approx(s.angles, abs=1e-9)

    def test_step_series_flattens_toward_mean(self):
        s = series([0.0] * 10 + [20.0] * 10)
        out = smooth_series(s, 1000.0)
        oracle = dense_smooth(s.angles, 1000.0)
        assert np.abs(out.angles - oracle).max() <= 1e-9
        assert np.abs(out.angles - 10.0).max() <= 0.5

    def test_matches_dense_solver_on_random_series(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(2, 60))
            lam = float(rng.uniform(0.01, 100))
            s = series(rng.uniform(-80, 80, n))
            out = smooth_series(s, lam)
            assert np.abs(out.angles - dense_smooth(s.angles, lam)).max() <= 1e-9

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-90, 90), min_size=1, max_size=40),
           st.floats(0, 1e4))
    def test_total_variation_never_increases(self, values, lam):
        s = series(values)
        out = smooth_series(s, lam)
        assert total_variation(out.angles) <= total_variation(s.angles) + 1e-9

    def test_large_lambda_approaches_mean(self):
        rng = np.random.default_rng(2)
        s = series(rng.uniform(-60, 60, 15))
        out = smooth_series(s, 1e6)
        assert np.abs(out.angles - s.angles.mean()).max() <= 0.1

    def test_mean_preserved(self):
        rng = np.random.default_rng(3)
        s = series(rng.uniform(-50, 50, 30))
        out = smooth_series(s, 12.5)
        assert out.angles.mean() == pytest.approx(s.angles.mean(), abs=1e-9)

    def test_negative_lambda_rejected(self):
        with pytest.raises(ValueError):
            smooth_series(series([1.0, 2.0]), -0.5)

    def test_single_element(self):
        out = smooth_series(series([42.0]), 100.0)
        assert out.angles.tolist() == [42.0]


class TestAngleSeries:
    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            AngleSeries(np.zeros(3), ("a", "b"))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            AngleSeries(np.array([120.0]), ("a",))
