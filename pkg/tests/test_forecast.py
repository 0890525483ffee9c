import numpy as np
import pytest
from scipy.stats import norm

from loadbench.forecast import (
    DEFAULT_QUANTILE_LEVELS,
    ForecastTask,
    ProbabilisticForecast,
    gaussian_from_quantiles,
    interpolate_quantiles,
    quantiles_from_samples,
    samples_by_inverse_cdf,
    samples_by_point_noise,
)

from .conftest import make_series

NINE_LEVELS = tuple(round(0.1 * i, 1) for i in range(1, 10))


class TestGaussianFromQuantiles:
    def test_exact_gaussian_input(self):
        values = 100.0 + 10.0 * norm.ppf(NINE_LEVELS)
        mean, sigma = gaussian_from_quantiles(NINE_LEVELS, values)
        assert mean == pytest.approx(100.0, abs=1e-9)
        assert sigma == pytest.approx(10.0, abs=1e-9)

    def test_constant_values(self):
        mean, sigma = gaussian_from_quantiles(NINE_LEVELS, np.full(9, 50.0))
        assert (mean, sigma) == (50.0, 0.0)

    def test_matches_normal_equations_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            mu, sd = rng.uniform(-50, 50), rng.uniform(0.5, 20)
            values = mu + sd * norm.ppf(NINE_LEVELS) + rng.normal(0, 0.3, size=9)
            values = np.sort(values)
            # Independent oracle: full design-matrix least squares.
            design = np.column_stack([np.ones(9), norm.ppf(NINE_LEVELS)])
            beta, *_ = np.linalg.lstsq(design, values, rcond=None)
            mean, sigma = gaussian_from_quantiles(NINE_LEVELS, values)
            if beta[1] >= 0:
                assert mean == pytest.approx(beta[0], abs=1e-8)
                assert sigma == pytest.approx(beta[1], abs=1e-8)

    def test_rejects_single_level(self):
        with pytest.raises(ValueError):
            gaussian_from_quantiles([0.5], [10.0])


class TestSamplesByInverseCdf:
    def test_degenerate_curve(self):
        s = samples_by_inverse_cdf(NINE_LEVELS, np.full(9, 7.0), 500, seed=1)
        assert np.all(s == 7.0)

    def test_bounded_by_extreme_levels(self):
        rng = np.random.default_rng(2)
        values = np.sort(rng.normal(0, 5, size=9))
        s = samples_by_inverse_cdf(NINE_LEVELS, values, 10_000, seed=3)
        assert s.min() >= values[0]
        assert s.max() <= values[-1]

    def test_sample_quantiles_converge_to_curve(self):
        # Std-normal quantile curve on the default grid; interior sample
        # quantiles must reproduce it (KS-style tolerance in probability).
        levels = np.asarray(DEFAULT_QUANTILE_LEVELS)
        curve = norm.ppf(levels)
        s = samples_by_inverse_cdf(levels, curve, 100_000, seed=9)
        for level, value in zip(levels, curve):
            empirical = np.mean(s <= value + 1e-12)
            if level < 0.95:
                assert abs(empirical - level) < 0.01
        mid = quantiles_from_samples(s, levels)[0]
        inner = (levels > 0.05) & (levels < 0.95)
        assert np.allclose(mid[inner], curve[inner], atol=0.02)

    def test_deterministic(self):
        a = samples_by_inverse_cdf(NINE_LEVELS, np.arange(9.0), 100, seed=4)
        b = samples_by_inverse_cdf(NINE_LEVELS, np.arange(9.0), 100, seed=4)
        assert np.array_equal(a, b)


class TestSamplesByPointNoise:
    def test_zero_point_forecast(self):
        s = samples_by_point_noise(np.zeros(24), seed=0, n_samples=50)
        assert np.all(s == 0.0)

    def test_noise_scale_tracks_mean_magnitude(self):
        point = np.full(4, 200.0)
        s = samples_by_point_noise(point, seed=1, n_samples=100_000)
        observed = (s - point[:, None]).std()
        assert observed == pytest.approx(0.10 * 200.0, rel=0.02)

    def test_fixed_seed_identical(self):
        point = np.array([10.0, 20.0, 30.0])
        a = samples_by_point_noise(point, seed=7, n_samples=64)
        b = samples_by_point_noise(point, seed=7, n_samples=64)
        assert np.array_equal(a, b)


class TestQuantilesFromSamples:
    def test_two_point_median(self):
        q = quantiles_from_samples(np.array([[0.0, 10.0]]), [0.5])
        assert q[0, 0] == 5.0

    def test_standard_normal_tails(self):
        rng = np.random.default_rng(11)
        draws = rng.standard_normal(10_000)
        q = quantiles_from_samples(draws, [0.05, 0.95])[0]
        assert q[0] == pytest.approx(-1.645, abs=0.05)
        assert q[1] == pytest.approx(1.645, abs=0.05)

    def test_output_monotone_random_inputs(self):
        rng = np.random.default_rng(12)
        levels = DEFAULT_QUANTILE_LEVELS
        for _ in range(25):
            samples = rng.normal(0, rng.uniform(0.1, 10), size=(6, 40))
            q = quantiles_from_samples(samples, levels)
            assert np.all(np.diff(q, axis=1) >= 0)


class TestRoundTrip:
    def test_inverse_cdf_round_trip_inside_band(self):
        levels = np.asarray(DEFAULT_QUANTILE_LEVELS)
        curve = 500.0 + 80.0 * norm.ppf(levels)
        samples = samples_by_inverse_cdf(levels, curve, 100_000, seed=21)
        recovered = quantiles_from_samples(samples, levels)[0]
        assert np.allclose(recovered, curve, atol=0.02 * 80.0)


class TestProbabilisticForecast:
    def test_crossing_repaired_and_counted(self):
        q = np.array([[1.0, 0.5, 2.0], [0.0, 1.0, 2.0]])
        f = ProbabilisticForecast(point=[1.0, 1.0], quantiles=q, levels=(0.25, 0.5, 0.75))
        assert f.crossing_repairs == 1
        assert np.all(np.diff(f.quantiles, axis=1) >= 0)

    def test_point_snaps_to_median_column(self):
        q = np.array([[10.0, 20.0, 30.0]])
        f = ProbabilisticForecast(point=[99.0], quantiles=q, levels=(0.25, 0.5, 0.75))
        assert f.point[0] == 20.0

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            ProbabilisticForecast(point=[np.nan])

    def test_task_validates_levels(self):
        ctx = make_series([1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            ForecastTask("m", ctx, horizon=4, quantile_levels=(0.5, 0.5))
        with pytest.raises(ValueError):
            ForecastTask("m", ctx, horizon=0)


class TestInterpolateQuantiles:
    def test_regrids_onto_finer_levels(self):
        coarse_levels = (0.1, 0.5, 0.9)
        q = np.array([[10.0, 50.0, 90.0]])
        out = interpolate_quantiles(q, coarse_levels, (0.05, 0.1, 0.3, 0.5, 0.9, 0.95))
        assert np.allclose(out[0], [10.0, 10.0, 30.0, 50.0, 90.0, 90.0])
