"""Turn raw evaluation records into the benchmark's summary tables.

Grouped means only; empty groups stay blank (NaN), never zero. Each table
function takes the record list so callers can aggregate straight from a
store or from filtered subsets.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from .stats import RankingInput, StatsError, diebold_mariano, robustness_cv, window_ci
from .store import EvaluationRecord


class AggregateError(ValueError):
    pass


def records_frame(records: list[EvaluationRecord]) -> pd.DataFrame:
    """Flatten records into a DataFrame (one row per task attempt)."""
    rows = []
    for r in records:
        row = {
            "model": r.model_id,
            "context": r.context_length,
            "horizon": r.horizon,
            "period": r.period,
            "window": r.window_index,
            "perturbation": r.perturbation,
            "failed": r.failed,
            "mase": np.nan,
            "mae": np.nan,
            "crps": np.nan,
            "coverage_0.9": np.nan,
            "winkler_0.9": np.nan,
            "width_0.9": np.nan,
            "fit_seconds": r.fit_seconds,
            "inference_seconds": r.inference_seconds,
            "total_seconds": r.total_seconds,
        }
        if r.metrics is not None:
            row["mase"] = r.metrics.mase
            row["mae"] = r.metrics.mae
            if r.metrics.crps is not None:
                row["crps"] = r.metrics.crps
            row["coverage_0.9"] = r.metrics.coverage.get(0.9, np.nan)
            row["winkler_0.9"] = r.metrics.winkler.get(0.9, np.nan)
            row["width_0.9"] = r.metrics.norm_interval_width.get(0.9, np.nan)
        rows.append(row)
    return pd.DataFrame(rows)


def _successful(records, horizon=None, context=None, perturbed=False):
    out = []
    for r in records:
        if r.failed or r.metrics is None:
            continue
        if (r.perturbation is not None) != perturbed:
            continue
        if horizon is not None and r.horizon != horizon:
            continue
        if context is not None and r.context_length != context:
            continue
        out.append(r)
    return out


def model_order(records) -> list[str]:
    return sorted({r.model_id for r in records})


def mase_by_context(records: list[EvaluationRecord], horizon: int) -> pd.DataFrame:
    """Mean MASE per model x context length at one horizon."""
    ok = _successful(records, horizon=horizon)
    if not ok:
        raise AggregateError(f"no successful records at horizon {horizon}")
    contexts = sorted({r.context_length for r in ok})
    models = model_order(ok)
    table = pd.DataFrame(index=models, columns=contexts, dtype=float)
    grouped: dict = {}
    for r in ok:
        grouped.setdefault((r.model_id, r.context_length), []).append(r.metrics.mase)
    for (model, context), values in grouped.items():
        table.loc[model, context] = float(np.mean(values))
    table.index.name = "model"
    return table


def calibration_table(
    records: list[EvaluationRecord], context: int = 512, horizon: int = 24
) -> pd.DataFrame:
    """Coverage / CRPS / Winkler at the 90% nominal level per model."""
    ok = _successful(records, horizon=horizon, context=context)
    rows = {}
    for model in model_order(ok):
        mine = [r for r in ok if r.model_id == model]
        cov = [r.metrics.coverage[0.9] for r in mine if 0.9 in r.metrics.coverage]
        crps = [r.metrics.crps for r in mine if r.metrics.crps is not None]
        wink = [r.metrics.winkler[0.9] for r in mine if 0.9 in r.metrics.winkler]
        rows[model] = {
            "coverage_0.9": float(np.mean(cov)) if cov else np.nan,
            "crps": float(np.mean(crps)) if crps else np.nan,
            "winkler_0.9": float(np.mean(wink)) if wink else np.nan,
            "n_tasks": len(mine),
        }
    table = pd.DataFrame.from_dict(rows, orient="index")
    table.index.name = "model"
    return table


def shift_table(
    records: list[EvaluationRecord],
    context: int = 512,
    horizon: int = 24,
    reference_period: str = "summer",
) -> pd.DataFrame:
    """MASE per model x period with percentage degradation vs the reference."""
    ok = _successful(records, horizon=horizon, context=context)
    if not ok:
        raise AggregateError("no successful records for the shift table")
    periods = sorted({r.period for r in ok})
    if reference_period not in periods:
        raise AggregateError(f"reference period {reference_period!r} absent from records")
    rows = {}
    for model in model_order(ok):
        row = {}
        for period in periods:
            values = [
                r.metrics.mase for r in ok if r.model_id == model and r.period == period
            ]
            row[f"mase_{period}"] = float(np.mean(values)) if values else np.nan
        ref = row.get(f"mase_{reference_period}", np.nan)
        for period in periods:
            value = row[f"mase_{period}"]
            row[f"degradation_{period}_pct"] = (
                100.0 * (value - ref) / ref if np.isfinite(value) and ref > 0 else np.nan
            )
        rows[model] = row
    table = pd.DataFrame.from_dict(rows, orient="index")
    table.index.name = "model"
    return table


def timing_table(records: list[EvaluationRecord]) -> pd.DataFrame:
    """Mean and total wall-clock per model, fit and inference separately."""
    ok = [r for r in records if not r.failed and r.total_seconds is not None]
    rows = {}
    for model in model_order(ok):
        mine = [r for r in ok if r.model_id == model]
        fit = [r.fit_seconds or 0.0 for r in mine]
        inf = [r.inference_seconds or 0.0 for r in mine]
        rows[model] = {
            "mean_fit_seconds": float(np.mean(fit)),
            "mean_inference_seconds": float(np.mean(inf)),
            "mean_total_seconds": float(np.mean(fit) + np.mean(inf)),
            "total_seconds": float(np.sum(fit) + np.sum(inf)),
            "n_tasks": len(mine),
        }
    table = pd.DataFrame.from_dict(rows, orient="index")
    table.index.name = "model"
    return table


def comparison_stats(
    records: list[EvaluationRecord], context: int = 512, horizon: int = 24
) -> pd.DataFrame:
    """Per-model mean MASE with a 95% confidence interval across windows."""
    ok = _successful(records, horizon=horizon, context=context)
    rows = {}
    for model in model_order(ok):
        values = [r.metrics.mase for r in ok if r.model_id == model]
        if len(values) >= 2:
            mean, half = window_ci(values)
        elif values:
            mean, half = values[0], np.nan
        else:
            mean, half = np.nan, np.nan
        rows[model] = {"mase_mean": mean, "ci95_half_width": half, "n_windows": len(values)}
    table = pd.DataFrame.from_dict(rows, orient="index")
    table.index.name = "model"
    return table


def reliability_table(
    records: list[EvaluationRecord], context: int = 512, horizon: int = 24
) -> pd.DataFrame:
    """Mean empirical coverage per model and nominal level (long format)."""
    ok = _successful(records, horizon=horizon, context=context)
    rows = []
    for model in model_order(ok):
        mine = [r for r in ok if r.model_id == model and r.metrics.coverage]
        if not mine:
            continue
        nominals = sorted({n for r in mine for n in r.metrics.coverage})
        for nominal in nominals:
            values = [r.metrics.coverage[nominal] for r in mine if nominal in r.metrics.coverage]
            widths = [
                r.metrics.norm_interval_width[nominal]
                for r in mine
                if nominal in r.metrics.norm_interval_width
            ]
            rows.append(
                {
                    "model": model,
                    "nominal": nominal,
                    "empirical": float(np.mean(values)),
                    "norm_width": float(np.mean(widths)) if widths else np.nan,
                }
            )
    return pd.DataFrame(rows, columns=["model", "nominal", "empirical", "norm_width"])


def missing_data_table(
    records: list[EvaluationRecord], context: int | None = None, horizon: int | None = None
) -> pd.DataFrame:
    """Mean MASE per model x missing rate (unperturbed rate 0 included)."""
    rows: dict = {}
    for r in records:
        if r.failed or r.metrics is None:
            continue
        if horizon is not None and r.horizon != horizon:
            continue
        if context is not None and r.context_length != context:
            continue
        if r.perturbation is None:
            rate = 0.0
        else:
            rate = float(r.perturbation.split("miss")[1].split("s")[0])
        rows.setdefault((r.model_id, rate), []).append(r.metrics.mase)
    out = [
        {"model": model, "missing_rate": rate, "mase": float(np.mean(values))}
        for (model, rate), values in sorted(rows.items())
    ]
    return pd.DataFrame(out, columns=["model", "missing_rate", "mase"])


def stratum_table(records: list[EvaluationRecord], field: str) -> pd.DataFrame:
    """Aggregate per-record stratified metrics (``extreme`` or ``day_type``),
    weighting each record's stratum mean by its step count."""
    if field not in ("extreme", "day_type"):
        raise AggregateError(f"unknown stratification {field!r}")
    acc: dict = {}
    for r in records:
        if r.failed:
            continue
        strata = getattr(r, field) or {}
        for name, stats in strata.items():
            slot = acc.setdefault((r.model_id, name), {"n": 0, "mae": 0.0, "mase": 0.0, "cov": 0.0, "cov_n": 0})
            n = stats["n"]
            slot["n"] += n
            slot["mae"] += stats["mae"] * n
            if "mase" in stats:
                slot["mase"] += stats["mase"] * n
            if "coverage_0.9" in stats:
                slot["cov"] += stats["coverage_0.9"] * n
                slot["cov_n"] += n
    rows = []
    for (model, name), slot in sorted(acc.items()):
        rows.append(
            {
                "model": model,
                "stratum": name,
                "n_hours": slot["n"],
                "mae": slot["mae"] / slot["n"],
                "mase": slot["mase"] / slot["n"],
                "coverage_0.9": slot["cov"] / slot["cov_n"] if slot["cov_n"] else np.nan,
            }
        )
    return pd.DataFrame(rows, columns=["model", "stratum", "n_hours", "mae", "mase", "coverage_0.9"])


def heatmap_matrix(
    records: list[EvaluationRecord], period: str, horizon: int
) -> pd.DataFrame:
    """Models x context lengths MASE matrix for one period and horizon."""
    ok = [r for r in _successful(records, horizon=horizon) if r.period == period]
    if not ok:
        raise AggregateError(f"no records for period {period!r} at horizon {horizon}")
    return mase_by_context(ok, horizon)


def timing_by_context(records: list[EvaluationRecord]) -> pd.DataFrame:
    """Mean total seconds per model x context length."""
    ok = [r for r in records if not r.failed and r.total_seconds is not None]
    grouped: dict = {}
    for r in ok:
        grouped.setdefault((r.model_id, r.context_length), []).append(r.total_seconds)
    rows = [
        {"model": model, "context": context, "mean_seconds": float(np.mean(vals))}
        for (model, context), vals in sorted(grouped.items())
    ]
    return pd.DataFrame(rows, columns=["model", "context", "mean_seconds"])


def aligned_errors(
    records: list[EvaluationRecord], model_a: str, model_b: str, context: int, horizon: int
) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate step errors of two models aligned by (period, window, step)."""
    def keyed(model):
        out = {}
        for r in _successful(records, horizon=horizon, context=context):
            if r.model_id == model and r.step_abs_errors is not None:
                out[(r.period, r.window_index)] = r.step_abs_errors
        return out

    a_map, b_map = keyed(model_a), keyed(model_b)
    shared = sorted(set(a_map) & set(b_map))
    if not shared:
        raise AggregateError(f"no aligned windows between {model_a} and {model_b}")
    a = np.concatenate([a_map[k] for k in shared])
    b = np.concatenate([b_map[k] for k in shared])
    return a, b


def dm_table(
    records: list[EvaluationRecord], context: int = 512, horizon: int = 24
) -> pd.DataFrame:
    """Pairwise Diebold-Mariano results among all models present."""
    ok = _successful(records, horizon=horizon, context=context)
    models = model_order(ok)
    rows = []
    for i, a in enumerate(models):
        for b in models[i + 1 :]:
            try:
                ea, eb = aligned_errors(records, a, b, context, horizon)
                result = diebold_mariano(ea, eb)
                rows.append(
                    {
                        "model_a": a,
                        "model_b": b,
                        "statistic": result.statistic,
                        "p_value": result.p_value,
                        "n": result.n,
                        "hac_lags": result.hac_lags,
                        "degenerate": result.degenerate,
                    }
                )
            except (AggregateError, StatsError):
                continue
    return pd.DataFrame(
        rows, columns=["model_a", "model_b", "statistic", "p_value", "n", "hac_lags", "degenerate"]
    )


def ranking_inputs(
    records: list[EvaluationRecord], context: int = 512, horizon: int = 24
) -> dict[str, RankingInput]:
    """Assemble the four ranking criteria per model from the store.

    Models lacking any criterion (no intervals, single period) are omitted.
    """
    ok = _successful(records, horizon=horizon, context=context)
    calib = calibration_table(records, context, horizon)
    out = {}
    for model in model_order(ok):
        mine = [r for r in ok if r.model_id == model]
        by_period: dict = {}
        for r in mine:
            by_period.setdefault(r.period, []).append(r.metrics.mase)
        period_means = {p: float(np.mean(v)) for p, v in by_period.items()}
        latency = [r.total_seconds for r in mine if r.total_seconds is not None]
        cov = calib.loc[model, "coverage_0.9"] if model in calib.index else np.nan
        crps = calib.loc[model, "crps"] if model in calib.index else np.nan
        if len(period_means) < 2 or not latency:
            continue
        if not (np.isfinite(cov) and np.isfinite(crps)):
            continue
        try:
            cv = robustness_cv(period_means)
        except StatsError:
            continue
        out[model] = RankingInput(
            coverage_deviation=abs(float(cov) - 0.90),
            crps=float(crps),
            robustness_cv=cv,
            latency=float(np.mean(latency)),
        )
    return out
