import numpy as np
import pytest

from loadbench.series import HOUR, HourlySeries, parse_utc


def make_series(values, start="2022-01-01T00:00:00Z", series_id="fixture"):
    values = np.asarray(values, dtype=np.float64)
    t0 = parse_utc(start)
    timestamps = t0 + np.arange(len(values)) * HOUR
    return HourlySeries(timestamps, values, series_id=series_id)


def synthetic_load(
    n_hours,
    start="2022-01-01T00:00:00Z",
    base=45000.0,
    daily_amp=0.12,
    weekly_amp=0.06,
    trend=0.0,
    noise=0.0,
    seed=0,
):
    """Two-seasonal synthetic load: base * trend * (1 + daily + weekly) + noise."""
    t = np.arange(n_hours, dtype=np.float64)
    seasonal = (
        daily_amp * np.sin(2 * np.pi * t / 24)
        + 0.4 * daily_amp * np.cos(2 * np.pi * 2 * t / 24)
        + weekly_amp * np.sin(2 * np.pi * t / 168)
        + 0.5 * weekly_amp * np.cos(2 * np.pi * 2 * t / 168)
    )
    values = base * (1.0 + trend * t / max(n_hours, 1)) * (1.0 + seasonal)
    if noise > 0:
        rng = np.random.default_rng(seed)
        values = values + rng.normal(0.0, noise, size=n_hours)
    return make_series(np.maximum(values, 1.0), start=start)


@pytest.fixture
def week_series():
    return synthetic_load(168 * 4)
