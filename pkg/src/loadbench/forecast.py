"""Forecaster abstraction, probabilistic forecast container, and the
quantile/sample conversion procedures used to post-process producer output.

Producers come in three shapes: quantile grids (most models), sample paths,
and bare point forecasts. The conversions here move between those shapes so
the metric layer can always score from the representation it needs.
"""

from __future__ import annotations

import abc
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .series import HourlySeries

DEFAULT_QUANTILE_LEVELS: tuple[float, ...] = tuple(
    round(0.05 * i, 2) for i in range(1, 20)
)
DEFAULT_SAMPLE_COUNT = 1000

# Inverse-CDF sampling is restricted to this probability band; outside it a
# quantile grid carries no information and extrapolation would fabricate tails.
SAMPLE_PROB_LO = 0.05
SAMPLE_PROB_HI = 0.95

POINT_NOISE_FRACTION = 0.10


class ForecastFailure(Exception):
    """A model could not produce a usable forecast for a task.

    The harness records these as failed tasks; they never abort a sweep.
    """

    def __init__(self, model_id: str, reason: str, details: dict | None = None):
        super().__init__(f"{model_id}: {reason}")
        self.model_id = model_id
        self.reason = reason
        self.details = details or {}


@dataclass(frozen=True)
class ForecastTask:
    """One forecast request: context window, horizon, and quantile grid.

    ``task_id`` is optional plumbing so external producers can correlate
    requests; the engine sets it to the sweep-cell identity.
    """

    model_id: str
    context: HourlySeries
    horizon: int
    quantile_levels: tuple[float, ...] = DEFAULT_QUANTILE_LEVELS
    origin: np.datetime64 | None = None
    task_id: str | None = None

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        levels = np.asarray(self.quantile_levels, dtype=np.float64)
        if levels.size and (np.any(levels <= 0) or np.any(levels >= 1)):
            raise ValueError("quantile levels must lie strictly inside (0, 1)")
        if levels.size > 1 and np.any(np.diff(levels) <= 0):
            raise ValueError("quantile levels must be strictly increasing")
        if self.origin is None:
            object.__setattr__(self, "origin", self.context.end)


@dataclass
class ProbabilisticForecast:
    """Forecast output: point path plus optional quantile matrix and samples.

    Quantile rows that cross are repaired by per-step sorting at
    construction; the number of repaired steps is kept in
    ``crossing_repairs``. When the 0.5 level is present the point forecast
    is defined as that column.
    """

    point: np.ndarray
    quantiles: np.ndarray | None = None
    levels: tuple[float, ...] | None = None
    samples: np.ndarray | None = None
    fit_seconds: float = 0.0
    inference_seconds: float = 0.0
    crossing_repairs: int = 0
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        self.point = np.asarray(self.point, dtype=np.float64)
        if self.point.ndim != 1 or not np.all(np.isfinite(self.point)):
            raise ValueError("point forecast must be a finite 1-d array")
        if self.quantiles is not None:
            q = np.asarray(self.quantiles, dtype=np.float64)
            if self.levels is None:
                raise ValueError("quantiles supplied without levels")
            levels = tuple(float(l) for l in self.levels)
            if q.shape != (len(self.point), len(levels)):
                raise ValueError(
                    f"quantile matrix shape {q.shape} != "
                    f"({len(self.point)}, {len(levels)})"
                )
            if not np.all(np.isfinite(q)):
                raise ValueError("quantile matrix contains non-finite values")
            crossing = np.any(np.diff(q, axis=1) < 0, axis=1)
            if crossing.any():
                q = np.sort(q, axis=1)
                self.crossing_repairs += int(crossing.sum())
            self.quantiles = q
            self.levels = levels
            if 0.5 in levels:
                self.point = q[:, levels.index(0.5)].copy()
        if self.samples is not None:
            s = np.asarray(self.samples, dtype=np.float64)
            if s.ndim != 2 or s.shape[0] != len(self.point):
                raise ValueError(f"samples must be H x S, got shape {s.shape}")
            if not np.all(np.isfinite(s)):
                raise ValueError("samples contain non-finite values")
            self.samples = s

    @property
    def horizon(self) -> int:
        return len(self.point)


class Forecaster(abc.ABC):
    """A forecast producer. Given identical task and seed, output must be
    identical; external adapters pin their own seeds to honour this."""

    model_id: str
    kind: str = "native-baseline"

    @abc.abstractmethod
    def forecast(self, task: ForecastTask, seed: int = 0) -> ProbabilisticForecast:
        ...

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.model_id}>"


def gaussian_from_quantiles(levels, values) -> tuple[float, float]:
    """Least-squares Gaussian fit to a quantile curve.

    Solves values ~ mean + sigma * z(level) by the normal equations, where z
    is the standard normal quantile function. A degenerate fit (all values
    equal, or downward-sloping inputs) clamps sigma to 0 with a warning.
    """
    levels = np.asarray(levels, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if levels.size < 2 or np.unique(levels).size < 2:
        raise ValueError("need at least 2 distinct quantile levels")
    z = norm.ppf(levels)
    zbar = z.mean()
    vbar = values.mean()
    denom = float(np.sum((z - zbar) ** 2))
    sigma = float(np.sum((z - zbar) * (values - vbar)) / denom)
    mean = float(vbar - sigma * zbar)
    if sigma < 0:
        warnings.warn("gaussian_from_quantiles: negative slope, clamping sigma to 0")
        sigma = 0.0
        mean = vbar
    return mean, sigma


def samples_by_inverse_cdf(levels, values, n_samples: int, seed: int = 0) -> np.ndarray:
    """Draw samples by inverse-CDF interpolation of a quantile curve.

    Uniform draws are censored into the [0.05, 0.95] probability band (mass
    beyond the band collapses onto its edges, so interior sample quantiles
    reproduce the curve) and mapped through the piecewise-linear
    (level, value) curve, held constant beyond the provided end levels.
    Deterministic per seed.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    levels = np.asarray(levels, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    rng = np.random.default_rng(seed)
    u = np.clip(rng.uniform(0.0, 1.0, size=n_samples), SAMPLE_PROB_LO, SAMPLE_PROB_HI)
    return np.interp(u, levels, values)


def samples_by_point_noise(
    point_values, seed: int = 0, n_samples: int = DEFAULT_SAMPLE_COUNT
) -> np.ndarray:
    """Synthesize an H x S sample matrix around a bare point forecast.

    Additive Gaussian noise with standard deviation equal to 10% of the mean
    absolute forecast level; the fallback uncertainty for producers that
    emit no distributional output.
    """
    point = np.asarray(point_values, dtype=np.float64)
    if not np.all(np.isfinite(point)):
        raise ValueError("point forecast must be finite")
    scale = POINT_NOISE_FRACTION * float(np.mean(np.abs(point)))
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, 1.0, size=(point.size, n_samples)) * scale
    return point[:, None] + noise


def quantiles_from_samples(samples, levels) -> np.ndarray:
    """Linear-interpolated empirical quantiles per step (H x len(levels))."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[None, :]
    if samples.shape[1] < 2:
        raise ValueError("need at least 2 samples per step")
    levels = np.asarray(levels, dtype=np.float64)
    return np.quantile(samples, levels, axis=1).T


def interpolate_quantiles(
    quantiles: np.ndarray, levels, target_levels
) -> np.ndarray:
    """Re-grid a quantile matrix onto target levels by per-step interpolation.

    Constant extrapolation beyond the producer's end levels, matching the
    inverse-CDF sampling convention.
    """
    quantiles = np.asarray(quantiles, dtype=np.float64)
    levels = np.asarray(levels, dtype=np.float64)
    target = np.asarray(target_levels, dtype=np.float64)
    out = np.empty((quantiles.shape[0], target.size))
    for h in range(quantiles.shape[0]):
        out[h] = np.interp(target, levels, quantiles[h])
    return out
