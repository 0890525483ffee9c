"""Append-only result store: one JSON object per line, one line per task
attempt. Line-delimited records make interrupted sweeps resumable (rerun
skips completed identities) and keep raw results diff-able; derived tables
are built from here, never stored back.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .metrics import MetricReport
from .series import format_utc
from .sweep import TaskSpec

RESULTS_FILE = "results.jsonl"
FORECASTS_FILE = "forecasts.jsonl"

# Fields excluded from determinism comparisons: wall-clock measurements
# legitimately differ between reruns of the same task.
TIMING_FIELDS = ("fit_seconds", "inference_seconds")


class StoreError(RuntimeError):
    pass


@dataclass
class EvaluationRecord:
    """Metrics, timing, and flags for one task attempt."""

    model_id: str
    context_length: int
    horizon: int
    period: str
    window_index: int
    origin: str
    perturbation: str | None = None
    failed: bool = False
    failure_reason: str | None = None
    metrics: MetricReport | None = None
    fit_seconds: float | None = None
    inference_seconds: float | None = None
    flags: tuple[str, ...] = ()
    step_abs_errors: tuple[float, ...] | None = None
    extreme: dict | None = None
    day_type: dict | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.failed and self.metrics is not None:
            raise StoreError("failed records must not carry metric values")

    @property
    def task_id(self) -> str:
        tag = self.perturbation or "none"
        return (
            f"{self.model_id}|C{self.context_length}|H{self.horizon}"
            f"|{self.period}|w{self.window_index}|{tag}"
        )

    @property
    def total_seconds(self) -> float | None:
        if self.fit_seconds is None and self.inference_seconds is None:
            return None
        return (self.fit_seconds or 0.0) + (self.inference_seconds or 0.0)

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "context_length": self.context_length,
            "horizon": self.horizon,
            "period": self.period,
            "window_index": self.window_index,
            "origin": self.origin,
            "perturbation": self.perturbation,
            "failed": self.failed,
            "failure_reason": self.failure_reason,
            "metrics": self.metrics.to_dict() if self.metrics else None,
            "fit_seconds": self.fit_seconds,
            "inference_seconds": self.inference_seconds,
            "flags": list(self.flags),
            "step_abs_errors": list(self.step_abs_errors)
            if self.step_abs_errors is not None
            else None,
            "extreme": self.extreme,
            "day_type": self.day_type,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvaluationRecord":
        return cls(
            model_id=data["model_id"],
            context_length=data["context_length"],
            horizon=data["horizon"],
            period=data["period"],
            window_index=data["window_index"],
            origin=data["origin"],
            perturbation=data.get("perturbation"),
            failed=data.get("failed", False),
            failure_reason=data.get("failure_reason"),
            metrics=MetricReport.from_dict(data["metrics"]) if data.get("metrics") else None,
            fit_seconds=data.get("fit_seconds"),
            inference_seconds=data.get("inference_seconds"),
            flags=tuple(data.get("flags") or ()),
            step_abs_errors=tuple(data["step_abs_errors"])
            if data.get("step_abs_errors") is not None
            else None,
            extreme=data.get("extreme"),
            day_type=data.get("day_type"),
            seed=data.get("seed", 0),
        )

    def content_dict(self) -> dict:
        """Record content with wall-clock timing stripped, for determinism
        and resume comparisons."""
        data = self.to_dict()
        for key in TIMING_FIELDS:
            data.pop(key, None)
        return data

    @classmethod
    def from_task(cls, spec: TaskSpec, **kwargs) -> "EvaluationRecord":
        return cls(
            model_id=spec.model_id,
            context_length=spec.context_length,
            horizon=spec.horizon,
            period=spec.period,
            window_index=spec.window_index,
            origin=format_utc(spec.origin),
            perturbation=spec.perturbation.tag if spec.perturbation else None,
            **kwargs,
        )


class ResultStore:
    """Single-writer JSONL store in a directory; readers may load any time."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.results_path = self.directory / RESULTS_FILE
        self.forecasts_path = self.directory / FORECASTS_FILE
        self._known_ids: set[str] = {r.task_id for r in self.load()}

    def __len__(self) -> int:
        return len(self._known_ids)

    def completed_ids(self) -> set[str]:
        return set(self._known_ids)

    def append(self, record: EvaluationRecord) -> None:
        if record.task_id in self._known_ids:
            raise StoreError(f"duplicate record for task {record.task_id}")
        line = json.dumps(record.to_dict(), sort_keys=True)
        with open(self.results_path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
        self._known_ids.add(record.task_id)

    def load(self) -> list[EvaluationRecord]:
        if not self.results_path.exists():
            return []
        records = []
        with open(self.results_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    records.append(EvaluationRecord.from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError) as exc:
                    raise StoreError(f"{self.results_path}:{lineno}: bad record: {exc}")
        return records

    def append_forecast(self, task_id: str, payload: dict) -> None:
        entry = dict(payload, task_id=task_id)
        with open(self.forecasts_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
            fh.flush()

    def load_forecast(self, task_id: str) -> dict | None:
        if not self.forecasts_path.exists():
            return None
        with open(self.forecasts_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                if entry.get("task_id") == task_id:
                    return entry
        return None
