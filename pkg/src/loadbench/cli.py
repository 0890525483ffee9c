"""Command-line interface.

Exit code 0 means zero infrastructure errors; individual model-fit failures
are recorded in the store as data, never as a process failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .aggregate import ranking_inputs
from .config import ConfigError, load_config
from .engine import EngineError, build_registry, run_sweep
from .eia import FetchError, fetch_eia
from .forecast import ProbabilisticForecast
from .prescriptive import (
    BatterySpec,
    PrescriptiveError,
    dr_tiers,
    optimize_dispatch,
    peak_exceedance,
    reserve_compare,
    synth_price,
)
from .report import emit_report
from .series import SeriesError, load_csv, parse_utc
from .stats import StatsError, composite_ranking
from .store import ResultStore, StoreError
from .sweep import PlanError, plan_sweep

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loadbench",
        description="Probabilistic load-forecasting benchmark engine",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    fetch = sub.add_parser("fetch", help="download hourly load data into the CSV cache")
    fetch.add_argument("--start", required=True, help="UTC instant, e.g. 2020-01-01T00:00:00Z")
    fetch.add_argument("--end", required=True, help="UTC instant (exclusive)")
    fetch.add_argument("--out", default="data/cache", help="cache directory")
    fetch.add_argument("--api-key", default=None, help="EIA API key (default: EIA_API_KEY)")

    run = sub.add_parser("run", help="execute a sweep")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True, help="store directory")
    run.add_argument("--series", default=None, help="series CSV (overrides config)")
    run.add_argument("--resume", action="store_true", help="skip completed task identities")
    run.add_argument("--parallelism", type=int, default=None)

    report = sub.add_parser("report", help="emit tables, plot data, and manifest")
    report.add_argument("--store", required=True)
    report.add_argument("--out", required=True)
    report.add_argument("--config", default=None, help="config to embed in the manifest")

    prescribe = sub.add_parser("prescribe", help="decision support from a stored forecast")
    prescribe.add_argument("analysis", choices=["peak", "reserve", "storage"])
    prescribe.add_argument("--forecast", default=None, help="forecast JSON file")
    prescribe.add_argument("--store", default=None, help="store directory with saved forecasts")
    prescribe.add_argument("--task", default=None, help="task id inside the store")
    prescribe.add_argument("--out", required=True, help="output directory")
    prescribe.add_argument("--threshold", type=float, default=None, help="peak threshold in MW")
    prescribe.add_argument("--battery-capacity", type=float, default=1000.0)
    prescribe.add_argument("--power-limit", type=float, default=250.0)
    prescribe.add_argument("--efficiency", type=float, default=0.90)
    prescribe.add_argument("--cycling-cost", type=float, default=2.0)
    prescribe.add_argument("--initial-soc", type=float, default=None)
    prescribe.add_argument("--start-hour", type=int, default=0)

    rank = sub.add_parser("rank", help="multi-criteria composite ranking from a store")
    rank.add_argument("--store", required=True)
    rank.add_argument("--context", type=int, default=512)
    rank.add_argument("--horizon", type=int, default=24)
    return parser


def cmd_fetch(args) -> int:
    series = fetch_eia(parse_utc(args.start), parse_utc(args.end), args.api_key, args.out)
    print(f"fetched {len(series)} points ({series.repaired} repaired) into {args.out}")
    return 0


def cmd_run(args) -> int:
    config = load_config(args.config)
    series_path = args.series or config.series_csv
    if not series_path:
        print("error: no series; pass --series or set series_csv in the config", file=sys.stderr)
        return 1
    series = load_csv(series_path)
    plan = plan_sweep(config, series)
    store = ResultStore(args.out)
    if not args.resume and len(store) > 0:
        print(
            f"error: store {args.out} already holds {len(store)} records; "
            "pass --resume to continue it",
            file=sys.stderr,
        )
        return 1
    registry = build_registry(config)
    summary = run_sweep(plan, registry, store, series, config, parallelism=args.parallelism)
    run_info = {
        "series_csv": str(series_path),
        "series_id": series.series_id,
        "series_span": [str(series.start) + "Z", str(series.end) + "Z"],
        "series_points": len(series),
        "repaired_points": series.repaired,
        "config": config.to_dict(),
    }
    (Path(args.out) / "run_info.json").write_text(
        json.dumps(run_info, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(
        f"planned {summary['planned']}, executed {summary['executed']}, "
        f"skipped {summary['skipped']}, failed {summary['failed']}"
    )
    return 0


def cmd_report(args) -> int:
    config = load_config(args.config) if args.config else None
    written = emit_report(ResultStore(args.store), args.out, config)
    print(f"wrote {len(written)} files under {args.out}")
    return 0


def _load_forecast_payload(args) -> dict:
    if args.forecast:
        with open(args.forecast, encoding="utf-8") as fh:
            return json.load(fh)
    if args.store and args.task:
        payload = ResultStore(args.store).load_forecast(args.task)
        if payload is None:
            raise PrescriptiveError(
                f"no saved forecast for task {args.task!r}; run with save_forecasts: true"
            )
        return payload
    raise PrescriptiveError("pass --forecast FILE or --store DIR --task ID")


def _forecast_from_payload(payload: dict) -> ProbabilisticForecast:
    return ProbabilisticForecast(
        point=np.asarray(payload["point"], dtype=np.float64),
        quantiles=np.asarray(payload["quantiles"], dtype=np.float64)
        if payload.get("quantiles")
        else None,
        levels=tuple(payload["levels"]) if payload.get("levels") else None,
        samples=np.asarray(payload["samples"], dtype=np.float64)
        if payload.get("samples")
        else None,
    )


def cmd_prescribe(args) -> int:
    payload = _load_forecast_payload(args)
    forecast = _forecast_from_payload(payload)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.analysis == "peak":
        threshold = args.threshold
        if threshold is None:
            threshold = float(payload.get("threshold", np.quantile(forecast.point, 0.95)))
        probs = peak_exceedance(forecast, threshold)
        tiers = dr_tiers(probs)
        path = out / "peak_detection.csv"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("hour,point_mw,exceedance_probability,dr_tier\n")
            for h in range(forecast.horizon):
                fh.write(f"{h},{forecast.point[h]:.6g},{probs[h]:.6g},{tiers[h]}\n")
        flagged = int(np.sum(probs > 0.5))
        print(
            f"threshold {threshold:.6g} MW: {flagged} of {forecast.horizon} hours "
            f"above 50% exceedance probability -> {path}"
        )
        return 0

    if args.analysis == "reserve":
        actuals = payload.get("actuals")
        if actuals is None:
            raise PrescriptiveError("reserve comparison needs 'actuals' in the forecast payload")
        result = reserve_compare(forecast, np.asarray(actuals, dtype=np.float64))
        path = out / "reserve_comparison.csv"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("policy,mean_reserve_mw,shortfall_rate,reduction_vs_fixed\n")
            for kind in sorted(result):
                row = result[kind]
                fh.write(
                    f"{kind},{row['mean_reserve']:.6g},{row['shortfall_rate']:.6g},"
                    f"{row['reduction_vs_fixed']:.6g}\n"
                )
        reduction = result.get("probabilistic", {}).get("reduction_vs_fixed")
        if reduction is not None:
            print(f"probabilistic sizing changes mean reserve by {reduction:+.1%} -> {path}")
        return 0

    spec = BatterySpec(
        capacity=args.battery_capacity,
        power_limit=args.power_limit,
        round_trip_efficiency=args.efficiency,
        cycling_cost=args.cycling_cost,
        initial_soc=args.initial_soc if args.initial_soc is not None else args.battery_capacity / 2,
    )
    prices = payload.get("prices")
    prices = (
        np.asarray(prices, dtype=np.float64)
        if prices is not None
        else synth_price(forecast.point, start_hour=args.start_hour)
    )
    schedule = optimize_dispatch(prices, spec)
    path = out / "dispatch_schedule.csv"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("hour,price,action_mw,soc_mwh\n")
        for h in range(len(prices)):
            fh.write(
                f"{h},{prices[h]:.6g},{schedule.actions[h]:.6g},{schedule.soc[h + 1]:.6g}\n"
            )
    print(f"net benefit {schedule.net_benefit:.2f} over {len(prices)} hours -> {path}")
    return 0


def cmd_rank(args) -> int:
    records = ResultStore(args.store).load()
    inputs = ranking_inputs(records, context=args.context, horizon=args.horizon)
    if len(inputs) < 2:
        print("error: need at least 2 rankable models in the store", file=sys.stderr)
        return 1
    ranked = composite_ranking(inputs)
    print(f"{'model':<24}{'calib':>6}{'crps':>6}{'robust':>7}{'latency':>8}{'composite':>10}")
    for item in ranked:
        ranks = item.ranks
        print(
            f"{item.model_id:<24}{ranks['coverage_deviation']:>6}{ranks['crps']:>6}"
            f"{ranks['robustness_cv']:>7}{ranks['latency']:>8}{item.composite:>10}"
        )
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    handlers = {
        "fetch": cmd_fetch,
        "run": cmd_run,
        "report": cmd_report,
        "prescribe": cmd_prescribe,
        "rank": cmd_rank,
    }
    try:
        return handlers[args.command](args)
    except (
        ConfigError,
        PlanError,
        SeriesError,
        StoreError,
        EngineError,
        FetchError,
        PrescriptiveError,
        StatsError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
