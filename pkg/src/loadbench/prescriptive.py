"""Decision support on top of probabilistic forecasts: peak-exceedance
probabilities and demand-response tiers, reserve sizing, synthetic price
construction, and battery dispatch optimization by dynamic programming.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forecast import (
    DEFAULT_SAMPLE_COUNT,
    ProbabilisticForecast,
    gaussian_from_quantiles,
    samples_by_inverse_cdf,
)

DR_TIER_THRESHOLDS = (0.25, 0.50, 0.75)

PRICE_BASE = 20.0
PRICE_SPAN = 80.0
# Additive diurnal adder in currency/MWh: trough around 06:00, peak at 18:00.
DIURNAL_PRICE_PROFILE = 15.0 * np.sin(2.0 * np.pi * (np.arange(24) - 12.0) / 24.0)

SOC_GRID_LEVELS = 201


class PrescriptiveError(ValueError):
    pass


@dataclass(frozen=True)
class ReservePolicy:
    """Reserve sizing rule: a fixed fraction of the point forecast, or the
    spread between a high target quantile and the median."""

    kind: str = "probabilistic"
    fixed_fraction: float = 0.10
    target_quantile: float = 0.999

    def __post_init__(self) -> None:
        if self.kind not in ("fixed", "probabilistic"):
            raise PrescriptiveError(f"unknown reserve policy kind {self.kind!r}")
        if self.fixed_fraction <= 0:
            raise PrescriptiveError("fixed_fraction must be positive")
        if not 0.5 < self.target_quantile < 1.0:
            raise PrescriptiveError("target_quantile must lie in (0.5, 1)")


@dataclass(frozen=True)
class BatterySpec:
    """Storage parameters. Efficiency is round-trip; each leg applies its
    square root so a full cycle returns round_trip_efficiency of the energy."""

    capacity: float = 1000.0
    power_limit: float = 250.0
    round_trip_efficiency: float = 0.90
    cycling_cost: float = 2.0
    initial_soc: float = 500.0

    def __post_init__(self) -> None:
        if not 0.0 < self.round_trip_efficiency <= 1.0:
            raise PrescriptiveError("round_trip_efficiency must lie in (0, 1]")
        if not 0.0 <= self.initial_soc <= self.capacity:
            raise PrescriptiveError(
                f"initial_soc {self.initial_soc} outside [0, {self.capacity}]"
            )
        if self.power_limit <= 0:
            raise PrescriptiveError("power_limit must be positive")


@dataclass
class DispatchSchedule:
    """Hourly battery actions (MW, positive = discharge), the implied state
    of charge, and the net benefit of the schedule."""

    actions: np.ndarray
    soc: np.ndarray
    net_benefit: float
    spec: BatterySpec
    prices: np.ndarray

    def __post_init__(self) -> None:
        self.actions = np.asarray(self.actions, dtype=np.float64)
        self.soc = np.asarray(self.soc, dtype=np.float64)
        self.prices = np.asarray(self.prices, dtype=np.float64)
        spec = self.spec
        tol = 1e-6 * max(spec.capacity, 1.0)
        if np.any(np.abs(self.actions) > spec.power_limit + tol):
            raise PrescriptiveError("action exceeds power limit")
        if np.any(self.soc < -tol) or np.any(self.soc > spec.capacity + tol):
            raise PrescriptiveError("state of charge outside [0, capacity]")
        if not np.allclose(np.diff(self.soc), -self.actions, atol=tol):
            raise PrescriptiveError("state-of-charge trajectory inconsistent with actions")
        recomputed = schedule_benefit(self.actions, self.prices, spec)
        scale = max(abs(recomputed), 1.0)
        if abs(recomputed - self.net_benefit) > 1e-6 * scale:
            raise PrescriptiveError(
                f"net_benefit {self.net_benefit} != recomputed {recomputed}"
            )


def _forecast_samples(
    forecast: ProbabilisticForecast, n_samples: int, seed: int
) -> np.ndarray:
    if forecast.samples is not None:
        return forecast.samples
    if forecast.quantiles is None:
        raise PrescriptiveError("forecast carries neither samples nor quantiles")
    rows = [
        samples_by_inverse_cdf(forecast.levels, forecast.quantiles[h], n_samples, seed + h)
        for h in range(forecast.horizon)
    ]
    return np.vstack(rows)


def peak_exceedance(
    forecast: ProbabilisticForecast,
    threshold: float,
    n_samples: int = DEFAULT_SAMPLE_COUNT,
    seed: int = 0,
) -> np.ndarray:
    """Per-hour probability that load exceeds `threshold` (fraction of
    samples strictly above it)."""
    samples = _forecast_samples(forecast, n_samples, seed)
    return np.mean(samples > threshold, axis=1)


def dr_tiers(probabilities) -> np.ndarray:
    """Demand-response activation level per hour from exceedance probability:
    0 below 0.25, then 1, 2, and 3 at the 0.25/0.5/0.75 cutoffs."""
    p = np.asarray(probabilities, dtype=np.float64)
    if np.any(p < 0) or np.any(p > 1):
        raise PrescriptiveError("probabilities must lie in [0, 1]")
    return np.digitize(p, DR_TIER_THRESHOLDS)


def _probabilistic_reserve(
    forecast: ProbabilisticForecast, target_quantile: float
) -> np.ndarray:
    if forecast.samples is not None:
        hi = np.quantile(forecast.samples, target_quantile, axis=1)
        med = np.quantile(forecast.samples, 0.5, axis=1)
        return hi - med
    if forecast.quantiles is None:
        raise PrescriptiveError("forecast carries neither samples nor quantiles")
    # Tail quantiles beyond the grid come from the fitted-Gaussian
    # approximation of the quantile curve.
    from scipy.stats import norm

    reserve = np.empty(forecast.horizon)
    z = norm.ppf(target_quantile)
    for h in range(forecast.horizon):
        mean, sigma = gaussian_from_quantiles(forecast.levels, forecast.quantiles[h])
        reserve[h] = z * sigma
    return reserve


def reserve_compare(
    forecast: ProbabilisticForecast,
    actuals,
    policies: tuple[ReservePolicy, ...] = (
        ReservePolicy(kind="fixed"),
        ReservePolicy(kind="probabilistic"),
    ),
) -> dict[str, dict[str, float]]:
    """Compare reserve-sizing policies against realized load.

    A shortfall is an hour where the actual exceeded point forecast plus
    reserve; `reduction` is relative to the same-fraction fixed rule.
    """
    actuals = np.asarray(actuals, dtype=np.float64)
    if actuals.shape != forecast.point.shape:
        raise PrescriptiveError("actuals must align with the forecast horizon")
    out = {}
    for policy in policies:
        fixed_reserve = policy.fixed_fraction * forecast.point
        if policy.kind == "fixed":
            reserve = fixed_reserve
        else:
            reserve = _probabilistic_reserve(forecast, policy.target_quantile)
        shortfall = np.mean(actuals > forecast.point + reserve)
        mean_fixed = float(np.mean(fixed_reserve))
        out[policy.kind] = {
            "mean_reserve": float(np.mean(reserve)),
            "shortfall_rate": float(shortfall),
            "reduction_vs_fixed": 1.0 - float(np.mean(reserve)) / mean_fixed,
        }
    return out


def synth_price(load_forecast, start_hour: int = 0) -> np.ndarray:
    """Deterministic synthetic hourly price from a load trajectory.

    Affine map of min-max-normalized load onto [20, 100] currency/MWh plus a
    fixed diurnal adder indexed by hour of day. Explicitly synthetic; not
    market data.
    """
    load = np.asarray(load_forecast, dtype=np.float64)
    if load.size == 0:
        raise PrescriptiveError("load forecast must be non-empty")
    span = load.max() - load.min()
    if span == 0:
        base = np.zeros_like(load)
    else:
        base = (load - load.min()) / span
    hours = (start_hour + np.arange(load.size)) % 24
    return PRICE_BASE + PRICE_SPAN * base + DIURNAL_PRICE_PROFILE[hours]


def schedule_benefit(actions, prices, spec: BatterySpec) -> float:
    """Objective value of a schedule: discharge revenue at sqrt-efficiency,
    charge cost at inverse sqrt-efficiency, minus cycling cost on throughput."""
    actions = np.asarray(actions, dtype=np.float64)
    prices = np.asarray(prices, dtype=np.float64)
    root_eta = np.sqrt(spec.round_trip_efficiency)
    discharge = np.maximum(actions, 0.0)
    charge = np.maximum(-actions, 0.0)
    return float(
        np.sum(
            prices * discharge * root_eta
            - prices * charge / root_eta
            - spec.cycling_cost * np.abs(actions)
        )
    )


def optimize_dispatch(
    prices, spec: BatterySpec = BatterySpec(), n_levels: int = SOC_GRID_LEVELS
) -> DispatchSchedule:
    """Exact dynamic program over a discretized state-of-charge grid.

    The schedule is cycle-neutral: the terminal state of charge must return
    to the initial level, so profit can only come from price spread, never
    from draining pre-existing inventory. The initial state snaps to the
    nearest grid level and actions move between grid levels within the
    power limit; optimality is exact relative to that grid.
    """
    prices = np.asarray(prices, dtype=np.float64)
    horizon = prices.size
    if horizon < 2:
        raise PrescriptiveError("dispatch horizon must be at least 2 hours")
    if n_levels < 2:
        raise PrescriptiveError("need at least 2 grid levels")

    delta = spec.capacity / (n_levels - 1)
    max_steps = int(np.floor(spec.power_limit / delta + 1e-9))
    shifts = np.arange(-max_steps, max_steps + 1)
    root_eta = np.sqrt(spec.round_trip_efficiency)

    start_level = int(round(spec.initial_soc / delta))
    value = np.full(n_levels, -np.inf)
    value[start_level] = 0.0
    choice = np.zeros((horizon, n_levels), dtype=np.int64)
    for h in range(horizon - 1, -1, -1):
        best = np.full(n_levels, -np.inf)
        best_shift = np.zeros(n_levels, dtype=np.int64)
        for s in shifts:
            d = s * delta  # change in stored energy; negative = discharge
            if d > 0:
                reward = -prices[h] * d / root_eta - spec.cycling_cost * d
            elif d < 0:
                reward = prices[h] * (-d) * root_eta - spec.cycling_cost * (-d)
            else:
                reward = 0.0
            if s >= 0:
                lo, hi = 0, n_levels - s
            else:
                lo, hi = -s, n_levels
            cand = reward + value[lo + s : hi + s]
            idx = np.arange(lo, hi)
            better = cand > best[idx]
            best[idx[better]] = cand[better]
            best_shift[idx[better]] = s
        value = best
        choice[h] = best_shift

    soc_levels = [start_level]
    actions = []
    level = start_level
    for h in range(horizon):
        s = int(choice[h, level])
        actions.append(-s * delta)  # positive action = discharge
        level += s
        soc_levels.append(level)
    actions = np.asarray(actions)
    soc = np.asarray(soc_levels, dtype=np.float64) * delta
    net = schedule_benefit(actions, prices, spec)
    return DispatchSchedule(actions=actions, soc=soc, net_benefit=net, spec=spec, prices=prices)
