"""Report emission: summary tables as CSV and readable text, per-figure
plot-data files, and a run manifest.

Output is a pure function of the store contents (plus the config), so
regenerating a report from the same store is byte-identical: models are
sorted, floats use one fixed format, and no wall-clock timestamps are
written.
"""

from __future__ import annotations

import json
import platform
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .aggregate import (
    AggregateError,
    calibration_table,
    comparison_stats,
    dm_table,
    heatmap_matrix,
    mase_by_context,
    missing_data_table,
    reliability_table,
    shift_table,
    stratum_table,
    timing_by_context,
    timing_table,
)
from .config import SweepConfig
from .store import EvaluationRecord, ResultStore

FLOAT_FORMAT = "%.6g"
# Readable tables cap extreme cells for scanability; the CSV keeps exact
# values and the text footnotes the true mean.
DISPLAY_CAP = 2.0


def _write_csv(frame: pd.DataFrame, path: Path, index: bool = True) -> None:
    frame.to_csv(path, float_format=FLOAT_FORMAT, index=index, lineterminator="\n")


def _capped_text(frame: pd.DataFrame, title: str) -> str:
    cap_applies = title.startswith("MASE")
    shown = frame.astype(object)
    footnotes = []
    for row in frame.index:
        for col in frame.columns:
            value = frame.loc[row, col]
            if not isinstance(value, (int, float, np.integer, np.floating)):
                continue
            if not np.isfinite(value):
                shown.loc[row, col] = "-"
            elif cap_applies and value > DISPLAY_CAP:
                footnotes.append(f"  {row} @ {col}: true mean {value:.6g}")
                shown.loc[row, col] = f">{DISPLAY_CAP:g}"
            else:
                shown.loc[row, col] = f"{value:.3f}"
    body = shown.to_string()
    text = f"{title}\n{'=' * len(title)}\n{body}\n"
    if footnotes:
        text += "values above the display cap:\n" + "\n".join(sorted(footnotes)) + "\n"
    return text + "\n"


def versions() -> dict:
    import scipy

    return {
        "loadbench": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
    }


def emit_report(
    store: ResultStore,
    out_dir,
    config: SweepConfig | None = None,
    calibration_context: int = 512,
    calibration_horizon: int = 24,
    reference_period: str = "summer",
) -> list[str]:
    """Write tables, plot data, and the manifest; returns written paths.

    An empty store still produces a manifest, with warnings for each table
    that could not be built.
    """
    out = Path(out_dir)
    tables_dir = out / "tables"
    plots_dir = out / "plot_data"
    tables_dir.mkdir(parents=True, exist_ok=True)
    plots_dir.mkdir(parents=True, exist_ok=True)
    records = store.load()
    written: list[str] = []
    warnings: list[str] = []
    text_sections: list[str] = []

    def emit_table(name, builder, title, index=True):
        try:
            frame = builder()
        except (AggregateError, KeyError, ValueError) as exc:
            warnings.append(f"{name}: {exc}")
            return None
        if frame.empty:
            warnings.append(f"{name}: empty table")
            return None
        path = tables_dir / f"{name}.csv"
        _write_csv(frame, path, index=index)
        written.append(str(path))
        text_sections.append(_capped_text(frame, title))
        return frame

    horizons = sorted({r.horizon for r in records})
    for horizon in horizons:
        emit_table(
            f"mase_by_context_h{horizon}",
            lambda h=horizon: mase_by_context(records, h),
            f"MASE by context length (horizon {horizon} h)",
        )
    emit_table(
        "calibration",
        lambda: calibration_table(records, calibration_context, calibration_horizon),
        f"Calibration at 90% nominal (C={calibration_context}, H={calibration_horizon})",
    )
    emit_table(
        "distribution_shift",
        lambda: shift_table(records, calibration_context, calibration_horizon, reference_period),
        f"MASE under distribution shift (reference: {reference_period})",
    )
    emit_table("timing", lambda: timing_table(records), "Computational cost per forecast")

    # Plot-data files: one CSV per figure equivalent.
    def emit_plot(name, builder, index=False):
        try:
            frame = builder()
        except (AggregateError, KeyError, ValueError) as exc:
            warnings.append(f"{name}: {exc}")
            return
        if frame.empty:
            warnings.append(f"{name}: empty")
            return
        path = plots_dir / f"{name}.csv"
        _write_csv(frame, path, index=index)
        written.append(str(path))

    for horizon in horizons:
        emit_plot(
            f"mase_vs_context_h{horizon}",
            lambda h=horizon: _mase_curve_data(records, h),
        )
    periods = sorted({r.period for r in records})
    for period in periods:
        for horizon in horizons:
            emit_plot(
                f"heatmap_{period}_h{horizon}",
                lambda p=period, h=horizon: heatmap_matrix(records, p, h),
                index=True,
            )
    emit_plot(
        "reliability",
        lambda: reliability_table(records, calibration_context, calibration_horizon),
    )
    emit_plot(
        "comparison",
        lambda: comparison_stats(records, calibration_context, calibration_horizon),
        index=True,
    )
    emit_plot("missing_data", lambda: missing_data_table(records))
    emit_plot("extreme_events", lambda: stratum_table(records, "extreme"))
    emit_plot("day_type", lambda: stratum_table(records, "day_type"))
    emit_plot("timing_vs_context", lambda: timing_by_context(records))
    emit_plot(
        "dm_pairwise",
        lambda: dm_table(records, calibration_context, calibration_horizon),
    )

    if text_sections:
        text_path = tables_dir / "tables.txt"
        text_path.write_text("".join(text_sections), encoding="utf-8")
        written.append(str(text_path))

    run_info = None
    run_info_path = store.directory / "run_info.json"
    if run_info_path.exists():
        run_info = json.loads(run_info_path.read_text(encoding="utf-8"))
    manifest = {
        "record_count": len(records),
        "failed_count": sum(r.failed for r in records),
        "task_ids_sha": _ids_digest(records),
        "config": config.to_dict() if config else (run_info or {}).get("config"),
        "versions": versions(),
        "warnings": sorted(warnings),
        "run_info": run_info,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    written.append(str(manifest_path))
    return written


def _ids_digest(records: list[EvaluationRecord]) -> str:
    import hashlib

    joined = "\n".join(sorted(r.task_id for r in records))
    return hashlib.sha256(joined.encode()).hexdigest()


def _mase_curve_data(records, horizon):
    table = mase_by_context(records, horizon)
    rows = []
    for model in table.index:
        for context in table.columns:
            value = table.loc[model, context]
            if np.isfinite(value):
                rows.append({"model": model, "context": context, "mase": value})
    return pd.DataFrame(rows, columns=["model", "context", "mase"])
