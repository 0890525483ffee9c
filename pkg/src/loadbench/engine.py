"""Benchmark engine: resolve forecasters, execute planned tasks, score
them, and append records to the store.

Failures are data: a model that cannot fit a task produces a failed record
and the sweep continues. Only infrastructure problems (unresolvable models,
unusable stores) raise. Task seeds derive from the config seed and the task
identity, so reruns and resumed runs score identically.
"""

from __future__ import annotations

import hashlib
import logging
import os
from concurrent.futures import ThreadPoolExecutor, as_completed

import numpy as np

from .baselines import native_forecasters
from .config import SweepConfig
from .forecast import (
    Forecaster,
    ForecastFailure,
    ForecastTask,
    ProbabilisticForecast,
    quantiles_from_samples,
    samples_by_inverse_cdf,
    samples_by_point_noise,
)
from .metrics import (
    MetricError,
    MetricReport,
    coverage,
    crps_samples,
    fallback_period,
    mase,
    norm_interval_width,
    seasonal_scale,
    symmetric_nominals,
    winkler,
)
from .protocol import AdapterClient, AdapterError, AdapterForecaster
from .series import HOUR, HourlySeries, inject_missing, slice_context
from .store import EvaluationRecord, ResultStore
from .sweep import TaskSpec

logger = logging.getLogger(__name__)

EXTREME_REFERENCE_MIN = 20


class EngineError(RuntimeError):
    pass


def build_registry(config: SweepConfig) -> dict[str, Forecaster]:
    """Model id -> forecaster map: native baselines plus configured adapters."""
    registry: dict[str, Forecaster] = dict(native_forecasters())
    for model_id, command in config.adapters.items():
        registry[model_id] = AdapterForecaster(model_id, AdapterClient(command))
    missing = [m for m in config.models if m not in registry]
    if missing:
        raise EngineError(
            f"unresolvable model ids {missing}; configure adapter commands for them"
        )
    return registry


def task_seed(global_seed: int, task_id: str) -> int:
    digest = hashlib.sha256(f"{global_seed}|{task_id}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


def default_parallelism() -> int:
    try:
        import psutil

        physical = psutil.cpu_count(logical=False)
        if physical:
            return physical
    except ImportError:
        pass
    return os.cpu_count() or 1


def _weekday_mask(timestamps: np.ndarray) -> np.ndarray:
    days = timestamps.astype("datetime64[D]").astype(np.int64)
    weekday = (days + 3) % 7  # epoch day 0 is a Thursday
    return weekday < 5


def _stratified(errors, inside, mask, denom) -> dict | None:
    n = int(mask.sum())
    if n == 0:
        return None
    out = {"n": n, "mae": float(errors[mask].mean())}
    if denom > 0:
        out["mase"] = float(errors[mask].mean() / denom)
    if inside is not None:
        out["coverage_0.9"] = float(inside[mask].mean())
    return out


def score_forecast(
    forecast: ProbabilisticForecast,
    actuals: HourlySeries,
    scaling_values: np.ndarray,
    scaling_period: int,
    config: SweepConfig,
    seed: int,
    reference: HourlySeries | None,
    synthesize_uncertainty: bool,
) -> tuple[MetricReport, dict]:
    """Score one forecast; returns the report plus stratified extras."""
    y = actuals.values
    errors = np.abs(y - forecast.point)
    denom = seasonal_scale(scaling_values, scaling_period)
    report = MetricReport(
        mase=mase(y, forecast.point, scaling_values, scaling_period),
        mae=float(errors.mean()),
        n_steps=len(y),
    )

    samples = forecast.samples
    quantiles = forecast.quantiles
    levels = forecast.levels
    if quantiles is None and samples is None and synthesize_uncertainty:
        samples = samples_by_point_noise(forecast.point, seed=seed, n_samples=config.sample_count)
        quantiles = quantiles_from_samples(samples, config.quantile_levels)
        levels = config.quantile_levels
    if samples is None and quantiles is not None:
        rows = [
            samples_by_inverse_cdf(levels, quantiles[h], config.sample_count, seed + h)
            for h in range(forecast.horizon)
        ]
        samples = np.vstack(rows)

    inside90 = None
    if samples is not None:
        report.crps = crps_samples(y, samples)
    if quantiles is not None:
        for nominal in symmetric_nominals(levels):
            lo_idx = [round(float(l), 10) for l in levels].index(round((1 - nominal) / 2, 10))
            hi_idx = [round(float(l), 10) for l in levels].index(round((1 + nominal) / 2, 10))
            lower, upper = quantiles[:, lo_idx], quantiles[:, hi_idx]
            report.coverage[nominal] = coverage(y, quantiles, levels, nominal)
            report.winkler[nominal] = winkler(y, lower, upper, 1.0 - nominal)
        scale = float(np.mean(np.abs(y)))
        if scale > 0:
            report.norm_interval_width = norm_interval_width(quantiles, levels, scale)
        if 0.9 in report.coverage:
            lo_idx = [round(float(l), 10) for l in levels].index(0.05)
            hi_idx = [round(float(l), 10) for l in levels].index(0.95)
            inside90 = (quantiles[:, lo_idx] <= y) & (y <= quantiles[:, hi_idx])

    extras: dict = {"step_abs_errors": tuple(float(e) for e in errors)}
    if reference is not None and len(reference) >= EXTREME_REFERENCE_MIN:
        from .series import extreme_mask

        labels = extreme_mask(actuals, reference)
        extras["extreme"] = {
            name: strat
            for name in ("high", "low", "normal")
            if (strat := _stratified(errors, inside90, labels == name, denom)) is not None
        }
    weekday = _weekday_mask(actuals.timestamps)
    extras["day_type"] = {
        name: strat
        for name, mask in (("weekday", weekday), ("weekend", ~weekday))
        if (strat := _stratified(errors, inside90, mask, denom)) is not None
    }
    return report, extras


def evaluate_task(
    spec: TaskSpec,
    forecaster: Forecaster,
    series: HourlySeries,
    config: SweepConfig,
) -> tuple[EvaluationRecord, ProbabilisticForecast | None]:
    seed = task_seed(config.seed, spec.task_id)
    context = slice_context(series, spec.origin, spec.context_length)
    if spec.perturbation is not None:
        context = inject_missing(context, spec.perturbation)
    task = ForecastTask(
        model_id=spec.model_id,
        context=context,
        horizon=spec.horizon,
        quantile_levels=config.quantile_levels,
        origin=spec.origin,
        task_id=spec.task_id,
    )
    try:
        forecast = forecaster.forecast(task, seed)
    except ForecastFailure as exc:
        return (
            EvaluationRecord.from_task(
                spec, failed=True, failure_reason=exc.reason, seed=seed
            ),
            None,
        )
    except AdapterError as exc:
        return (
            EvaluationRecord.from_task(
                spec, failed=True, failure_reason=f"adapter: {exc}", seed=seed
            ),
            None,
        )
    except Exception as exc:  # a model blowing up is data, not a crash
        logger.warning("%s: unexpected model error: %s", spec.task_id, exc)
        return (
            EvaluationRecord.from_task(
                spec,
                failed=True,
                failure_reason=f"{type(exc).__name__}: {exc}",
                seed=seed,
            ),
            None,
        )

    actuals = series.window(spec.origin, spec.origin + spec.horizon * HOUR)
    history = series.window(series.start, spec.origin) if spec.origin > series.start else None
    if config.mase_scaling == "context":
        scaling_values = context.values
        scaling_period = fallback_period(len(context))
    else:
        if history is None:
            raise EngineError("history scaling requires data before the first origin")
        scaling_values = history.values
        scaling_period = fallback_period(len(history))

    synthesize = forecaster.kind == "external-adapter"
    try:
        report, extras = score_forecast(
            forecast,
            actuals,
            scaling_values,
            scaling_period,
            config,
            seed,
            reference=history,
            synthesize_uncertainty=synthesize,
        )
    except MetricError as exc:
        return (
            EvaluationRecord.from_task(
                spec, failed=True, failure_reason=f"scoring: {exc}", seed=seed
            ),
            None,
        )
    record = EvaluationRecord.from_task(
        spec,
        metrics=report,
        fit_seconds=forecast.fit_seconds,
        inference_seconds=forecast.inference_seconds,
        flags=forecast.flags
        + (("interval_repairs",) if forecast.crossing_repairs else ()),
        step_abs_errors=extras["step_abs_errors"],
        extreme=extras.get("extreme"),
        day_type=extras["day_type"],
        seed=seed,
    )
    return record, forecast


def run_sweep(
    plan: list[TaskSpec],
    registry: dict[str, Forecaster],
    store: ResultStore,
    series: HourlySeries,
    config: SweepConfig,
    parallelism: int | None = None,
) -> dict:
    """Execute every not-yet-completed task in the plan.

    Returns a summary dict with completed/failed/skipped counts. The store
    is written only from this thread; adapter endpoints serialize their own
    requests, so adapter timing never includes queue wait.
    """
    unresolved = {t.model_id for t in plan} - set(registry)
    if unresolved:
        raise EngineError(f"plan references unresolved models {sorted(unresolved)}")
    completed = store.completed_ids()
    todo = [t for t in plan if t.task_id not in completed]
    skipped = len(plan) - len(todo)
    if skipped:
        logger.info("resuming: %d of %d tasks already complete", skipped, len(plan))

    workers = parallelism or config.parallelism or default_parallelism()
    n_failed = 0
    try:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(evaluate_task, spec, registry[spec.model_id], series, config): spec
                for spec in todo
            }
            for future in as_completed(futures):
                record, forecast = future.result()
                store.append(record)
                n_failed += record.failed
                if config.save_forecasts and forecast is not None:
                    payload = {
                        "point": [float(v) for v in forecast.point],
                        "quantiles": [[float(v) for v in row] for row in forecast.quantiles]
                        if forecast.quantiles is not None
                        else None,
                        "levels": list(forecast.levels) if forecast.levels else None,
                        "origin": record.origin,
                    }
                    store.append_forecast(record.task_id, payload)
    finally:
        for forecaster in registry.values():
            if isinstance(forecaster, AdapterForecaster):
                forecaster.client.close()
    return {
        "planned": len(plan),
        "executed": len(todo),
        "skipped": skipped,
        "failed": n_failed,
    }
