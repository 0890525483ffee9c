"""Point, distributional, and interval scores for probabilistic forecasts.

All scores are plain averages over forecast steps, so they are invariant to
reordering of (actual, forecast) pairs. CRPS is estimated from samples via
the energy form; interval scores take the quantile representation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SEASONAL_PERIOD = 168
FALLBACK_PERIODS = (168, 24, 1)


class MetricError(ValueError):
    """Raised when a score is undefined for the given inputs."""


@dataclass
class MetricReport:
    """Scores for one evaluated forecast task.

    Distributional fields are None for point-only producers. Coverage,
    Winkler, and width maps are keyed by nominal central-interval level
    (e.g. 0.9 for the interval between the 0.05 and 0.95 quantiles).
    """

    mase: float
    mae: float
    n_steps: int
    crps: float | None = None
    coverage: dict[float, float] = field(default_factory=dict)
    winkler: dict[float, float] = field(default_factory=dict)
    norm_interval_width: dict[float, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mase": self.mase,
            "mae": self.mae,
            "n_steps": self.n_steps,
            "crps": self.crps,
            "coverage": {f"{k:g}": v for k, v in self.coverage.items()},
            "winkler": {f"{k:g}": v for k, v in self.winkler.items()},
            "norm_interval_width": {
                f"{k:g}": v for k, v in self.norm_interval_width.items()
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricReport":
        return cls(
            mase=data["mase"],
            mae=data["mae"],
            n_steps=data["n_steps"],
            crps=data.get("crps"),
            coverage={float(k): v for k, v in (data.get("coverage") or {}).items()},
            winkler={float(k): v for k, v in (data.get("winkler") or {}).items()},
            norm_interval_width={
                float(k): v for k, v in (data.get("norm_interval_width") or {}).items()
            },
        )


def seasonal_scale(history, m: int = SEASONAL_PERIOD) -> float:
    """Mean absolute seasonal-difference error of a history at period m."""
    history = np.asarray(history, dtype=np.float64)
    if len(history) <= m:
        raise MetricError(f"scaling history length {len(history)} <= period {m}")
    return float(np.mean(np.abs(history[m:] - history[:-m])))


def fallback_period(n_history: int, periods=FALLBACK_PERIODS) -> int:
    """Largest candidate seasonal period usable for a history of n points."""
    for m in periods:
        if n_history > m:
            return m
    raise MetricError(f"history of {n_history} points supports no scaling period")


def mase(actuals, forecasts, scaling_history, m: int = SEASONAL_PERIOD) -> float:
    """Mean absolute scaled error.

    The numerator is the mean absolute forecast error over the horizon; the
    denominator is the mean absolute seasonal-difference error of
    ``scaling_history`` at period ``m``.
    """
    actuals = np.asarray(actuals, dtype=np.float64)
    forecasts = np.asarray(forecasts, dtype=np.float64)
    if actuals.shape != forecasts.shape or actuals.ndim != 1 or actuals.size < 1:
        raise MetricError("actuals and forecasts must be equal-length 1-d arrays")
    denom = seasonal_scale(scaling_history, m)
    if denom == 0.0:
        raise MetricError(
            f"degenerate scaling: history is exactly {m}-periodic (zero seasonal error)"
        )
    return float(np.mean(np.abs(actuals - forecasts)) / denom)


def crps_samples(actuals, samples) -> float:
    """CRPS estimated from samples via the energy form, averaged over steps.

    Per step: mean|X - y| - 0.5 * mean|X - X'| with the pair mean taken over
    all ordered sample pairs.
    """
    actuals = np.asarray(actuals, dtype=np.float64)
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[None, :]
    if samples.shape[0] != actuals.size:
        raise MetricError(
            f"samples shape {samples.shape} does not match {actuals.size} steps"
        )
    if samples.shape[1] < 2:
        raise MetricError("need at least 2 samples per step")
    n = samples.shape[1]
    term1 = np.mean(np.abs(samples - actuals[:, None]), axis=1)
    # E|X - X'| over all ordered pairs, via the sorted-sample identity.
    srt = np.sort(samples, axis=1)
    weights = 2.0 * np.arange(n) - n + 1.0
    term2 = (srt * weights).sum(axis=1) * 2.0 / (n * n)
    return float(np.mean(term1 - 0.5 * term2))


def _interval_columns(levels, nominal: float) -> tuple[int, int]:
    levels = [round(float(l), 10) for l in levels]
    lo = round((1.0 - nominal) / 2.0, 10)
    hi = round((1.0 + nominal) / 2.0, 10)
    if lo not in levels or hi not in levels:
        raise MetricError(
            f"levels {levels} lack the {lo:g}/{hi:g} pair for nominal {nominal:g}"
        )
    return levels.index(lo), levels.index(hi)


def coverage(actuals, quantiles, levels, nominal: float = 0.90) -> float:
    """Fraction of actuals inside the closed central interval at `nominal`."""
    actuals = np.asarray(actuals, dtype=np.float64)
    quantiles = np.asarray(quantiles, dtype=np.float64)
    i, j = _interval_columns(levels, nominal)
    lower, upper = quantiles[:, i], quantiles[:, j]
    inside = (lower <= actuals) & (actuals <= upper)
    return float(np.mean(inside))


def winkler(actuals, lower, upper, miscoverage: float) -> float:
    """Mean interval score with a 2/miscoverage penalty for misses.

    Inside the interval the score is the width; below/above, the width plus
    (2/miscoverage) times the violation distance. `miscoverage` is 1 minus
    the nominal level (0.10 for 90% intervals).
    """
    if not 0.0 < miscoverage < 1.0:
        raise MetricError(f"miscoverage must lie in (0, 1), got {miscoverage}")
    actuals = np.asarray(actuals, dtype=np.float64)
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    if np.any(lower > upper):
        raise MetricError("lower bound exceeds upper bound")
    width = upper - lower
    penalty = (2.0 / miscoverage) * (
        np.maximum(lower - actuals, 0.0) + np.maximum(actuals - upper, 0.0)
    )
    return float(np.mean(width + penalty))


def symmetric_nominals(levels) -> list[float]:
    """Nominal central-interval levels constructible from a symmetric grid."""
    levels = [round(float(l), 10) for l in levels]
    out = []
    for l in levels:
        if l >= 0.5:
            continue
        if round(1.0 - l, 10) in levels:
            out.append(round(1.0 - 2.0 * l, 10))
    return sorted(out)


def reliability_curve(actuals, quantiles, levels) -> list[tuple[float, float]]:
    """(nominal, empirical) coverage pairs for every symmetric interval."""
    return [
        (nominal, coverage(actuals, quantiles, levels, nominal))
        for nominal in symmetric_nominals(levels)
    ]


def norm_interval_width(quantiles, levels, actual_scale: float) -> dict[float, float]:
    """Mean interval width divided by the actuals' mean absolute level."""
    if actual_scale <= 0:
        raise MetricError(f"actual_scale must be positive, got {actual_scale}")
    quantiles = np.asarray(quantiles, dtype=np.float64)
    out = {}
    for nominal in symmetric_nominals(levels):
        i, j = _interval_columns(levels, nominal)
        out[nominal] = float(np.mean(quantiles[:, j] - quantiles[:, i]) / actual_scale)
    return out
