import numpy as np
import pytest

from loadbench.baselines import (
    DecompositionSpec,
    SarimaSpec,
    decomposition_fit_forecast,
    native_forecasters,
    sarima_fit_forecast,
    seasonal_naive,
)
from loadbench.forecast import ForecastFailure, ForecastTask
from loadbench.metrics import mase

from .conftest import make_series


def expform_load(n, base=45000.0, daily=0.10, weekly=0.05, annual=0.03, phase=1.0):
    """Noiseless multi-seasonal fixture: multiplicative daily/weekly cycles
    with a slow annual drift so weekly differencing is non-degenerate."""
    t = np.arange(n, dtype=np.float64)
    s = (
        daily * np.sin(2 * np.pi * t / 24)
        + 0.4 * daily * np.cos(2 * np.pi * 2 * t / 24)
        + weekly * np.sin(2 * np.pi * t / 168)
        + 0.5 * weekly * np.cos(2 * np.pi * 2 * t / 168)
        + annual * np.sin(2 * np.pi * t / 8760 + phase)
    )
    return base * np.exp(s)


def simulate_seasonal_ar(seed, n=424, phi=0.6):
    """Seasonal random-walk-with-AR generator: the ground truth embeds in
    the fixed estimation order with most coefficients at zero."""
    rng = np.random.default_rng(seed)
    burn = 200
    y = np.zeros(n + burn)
    eps = rng.normal(0, 1.0, n + burn)
    for t in range(25, n + burn):
        y[t] = y[t - 24] + phi * (y[t - 1] - y[t - 25]) + eps[t]
    return y[burn:] + 500.0


class TestSeasonalNaive:
    def test_exact_on_weekly_periodic_input(self):
        week = expform_load(168, annual=0.0)
        ctx = make_series(week)
        fc = seasonal_naive(ctx, 24)
        assert np.array_equal(fc.point, week[:24])
        fc_week = seasonal_naive(ctx, 168)
        assert np.array_equal(fc_week.point, week)

    def test_first_step_references_168_hours_back(self):
        values = np.arange(1.0, 201.0)
        fc = seasonal_naive(make_series(values), 24)
        assert fc.point[0] == values[200 - 168]

    def test_wrapping_beyond_lag(self):
        values = np.arange(1.0, 169.0)
        fc = seasonal_naive(make_series(values), 336)
        assert np.array_equal(fc.point[:168], values)
        assert np.array_equal(fc.point[168:], values)

    def test_insensitive_to_extra_context(self):
        full = expform_load(600)
        a = seasonal_naive(make_series(full[-400:]), 48)
        b = seasonal_naive(make_series(full[-200:]), 48)
        assert np.array_equal(a.point, b.point)

    def test_short_context_fallbacks(self):
        values = np.arange(1.0, 101.0)
        fc = seasonal_naive(make_series(values), 24)
        assert "lag_fallback_24" in fc.flags
        assert fc.point[0] == values[100 - 24]
        tiny = seasonal_naive(make_series([5.0, 6.0, 7.0]), 6)
        assert list(tiny.point) == [5.0, 6.0, 7.0, 5.0, 6.0, 7.0]

    def test_point_only(self):
        fc = seasonal_naive(make_series(np.arange(1.0, 201.0)), 24)
        assert fc.quantiles is None
        assert "point_only" in fc.flags


class TestSarima:
    def test_short_context_structured_failure(self):
        ctx = make_series(np.abs(np.random.default_rng(0).normal(50, 5, 24)))
        with pytest.raises(ForecastFailure) as exc:
            sarima_fit_forecast(ctx, 24)
        assert exc.value.details["required"] == 52
        assert exc.value.details["available"] == 24

    def test_white_noise_sanity(self):
        rng = np.random.default_rng(1)
        ctx = make_series(np.abs(rng.normal(100, 3, 600)))
        fc = sarima_fit_forecast(ctx, 48)
        widths = fc.quantiles[:, -1] - fc.quantiles[:, 0]
        assert np.all(np.diff(widths) >= -1e-9)
        assert np.all((fc.point > 80) & (fc.point < 120))

    def test_interval_width_grows_on_seasonal_data(self):
        ctx = make_series(expform_load(500))
        fc = sarima_fit_forecast(ctx, 24)
        widths = fc.quantiles[:, -1] - fc.quantiles[:, 0]
        assert np.all(np.diff(widths) >= -1e-9)
        assert widths[-1] > widths[0]

    def test_deterministic(self):
        ctx = make_series(expform_load(300))
        a = sarima_fit_forecast(ctx, 24)
        b = sarima_fit_forecast(ctx, 24)
        assert np.array_equal(a.point, b.point)

    @pytest.mark.parametrize("seed", range(6))
    def test_beats_seasonal_naive_on_simulation(self, seed):
        y = simulate_seasonal_ar(seed)
        ctx, actual = y[:400], y[400:424]
        series = make_series(ctx)
        fitted = sarima_fit_forecast(series, 24)
        naive = seasonal_naive(series, 24)
        assert mase(actual, fitted.point, ctx, m=24) < mase(actual, naive.point, ctx, m=24)

    def test_quantiles_at_requested_levels(self):
        ctx = make_series(expform_load(300))
        fc = sarima_fit_forecast(ctx, 12, quantile_levels=(0.1, 0.5, 0.9))
        assert fc.levels == (0.1, 0.5, 0.9)
        assert np.allclose(fc.point, fc.quantiles[:, 1])


class TestDecomposition:
    def test_constant_series_flat_forecast(self):
        ctx = make_series(np.full(100, 321.5))
        fc = decomposition_fit_forecast(ctx, 12)
        assert fc.point == pytest.approx(np.full(12, 321.5), rel=1e-8)

    def test_short_context_rank_deficient_and_wild(self):
        full = expform_load(1200)
        ctx = make_series(full[976:1000])
        fc = decomposition_fit_forecast(ctx, 24)
        assert "rank_deficient" in fc.flags
        score = mase(full[1000:1024], fc.point, full[:1000], m=168)
        assert score > 1.0

    @pytest.mark.parametrize("context_len", [336, 672])
    def test_long_context_beats_seasonal_naive(self, context_len):
        full = expform_load(1200)
        ctx = make_series(full[1000 - context_len : 1000])
        fc = decomposition_fit_forecast(ctx, 24)
        assert "rank_deficient" not in fc.flags
        score = mase(full[1000:1024], fc.point, full[:1000], m=168)
        assert score < 1.0

    def test_two_cycle_reproduction_within_one_percent(self):
        full = expform_load(800, annual=0.0)
        ctx = make_series(full[400:736])
        fc = decomposition_fit_forecast(ctx, 24)
        rel = np.abs(fc.point - full[736:760]) / full[736:760]
        assert rel.max() < 0.01

    def test_noiseless_fit_has_tight_intervals(self):
        full = expform_load(800)
        ctx = make_series(full[:336])
        fc = decomposition_fit_forecast(ctx, 24)
        widths = fc.quantiles[:, -1] - fc.quantiles[:, 0]
        assert np.all(widths < 0.01 * fc.point)

    def test_harmonic_counts_validated(self):
        with pytest.raises(ValueError):
            DecompositionSpec(fourier_daily=0)

    def test_minimum_context(self):
        with pytest.raises(ForecastFailure):
            decomposition_fit_forecast(make_series([1.0, 2.0]), 4)


class TestRegistry:
    def test_native_ids(self):
        registry = native_forecasters()
        assert set(registry) == {"seasonal-naive", "sarima", "fourier-decomp"}

    def test_forecasters_run_through_task_interface(self):
        registry = native_forecasters()
        ctx = make_series(expform_load(400))
        task = ForecastTask("any", ctx, horizon=24)
        for forecaster in registry.values():
            fc = forecaster.forecast(task, seed=0)
            assert fc.horizon == 24
