"""Sweep planning: expand a config into the ordered task list.

Rolling windows are placed earliest-first within each period at a stride of
the horizon, so same-period same-horizon windows never overlap in their
target hours and every model/context combination shares identical origins
(paired comparisons stay aligned by timestamp). Context history is drawn
from before the window origin and may extend back past the period start;
feasibility against the actual series span is checked when one is given.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SweepConfig
from .series import HOUR, HourlySeries, PerturbationSpec, format_utc

class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class TaskSpec:
    """Identity of one evaluation cell; context data is sliced at run time."""

    model_id: str
    context_length: int
    horizon: int
    period: str
    window_index: int
    origin: np.datetime64
    perturbation: PerturbationSpec | None = None

    @property
    def task_id(self) -> str:
        tag = self.perturbation.tag if self.perturbation else "none"
        return (
            f"{self.model_id}|C{self.context_length}|H{self.horizon}"
            f"|{self.period}|w{self.window_index}|{tag}"
        )

    def target_range(self) -> tuple[np.datetime64, np.datetime64]:
        return self.origin, self.origin + self.horizon * HOUR


def plan_sweep(config: SweepConfig, series: HourlySeries | None = None) -> list[TaskSpec]:
    """Expand the config into the full ordered task list.

    Raises PlanError when a period cannot hold the requested windows, or
    (when a series is supplied) when the series lacks the history or target
    span a task needs.
    """
    max_context = max(config.context_lengths)
    tasks: list[TaskSpec] = []
    for period in config.periods:
        for horizon in config.horizons:
            needed = config.windows_per_period * horizon
            if period.hours < needed:
                raise PlanError(
                    f"period {period.name!r} spans {period.hours} h but "
                    f"{config.windows_per_period} windows at horizon {horizon} "
                    f"need {needed} h"
                )
            origins = [
                period.start + k * horizon * HOUR for k in range(config.windows_per_period)
            ]
            if series is not None:
                first_context_start = origins[0] - max_context * HOUR
                last_target_end = origins[-1] + horizon * HOUR
                if first_context_start < series.start or last_target_end > series.end:
                    raise PlanError(
                        f"period {period.name!r} at horizon {horizon} needs series "
                        f"coverage [{format_utc(first_context_start)}, "
                        f"{format_utc(last_target_end)}), series covers "
                        f"[{format_utc(series.start)}, {format_utc(series.end)})"
                    )
            for window_index, origin in enumerate(origins):
                for context_length in config.context_lengths:
                    for model_id in config.models:
                        variants: tuple[PerturbationSpec | None, ...] = (None,)
                        variants += tuple(config.perturbations)
                        for perturbation in variants:
                            tasks.append(
                                TaskSpec(
                                    model_id=model_id,
                                    context_length=context_length,
                                    horizon=horizon,
                                    period=period.name,
                                    window_index=window_index,
                                    origin=origin,
                                    perturbation=perturbation,
                                )
                            )
    return tasks
