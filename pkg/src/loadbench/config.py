"""Sweep configuration: the cross product of models, context lengths,
horizons, periods, and rolling windows, plus every behaviour switch the
engine honours. Configs load from YAML (or JSON) files with the same keys.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import yaml

from .forecast import DEFAULT_QUANTILE_LEVELS, DEFAULT_SAMPLE_COUNT
from .series import PerturbationSpec, TestPeriod, default_periods, parse_utc

DEFAULT_CONTEXT_LENGTHS = (24, 48, 96, 168, 336, 512, 1024, 2048)
DEFAULT_HORIZONS = (24, 168)
DEFAULT_WINDOWS_PER_PERIOD = 7

ADAPTER_MODEL_IDS = ("chronos-bolt-small", "chronos-2", "moirai-2-small", "ttm-r2")
NATIVE_MODEL_IDS = ("seasonal-naive", "sarima", "fourier-decomp")

MASE_SCALING_MODES = ("history", "context")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    models: tuple[str, ...]
    context_lengths: tuple[int, ...] = DEFAULT_CONTEXT_LENGTHS
    horizons: tuple[int, ...] = DEFAULT_HORIZONS
    periods: tuple[TestPeriod, ...] = ()
    windows_per_period: int = DEFAULT_WINDOWS_PER_PERIOD
    quantile_levels: tuple[float, ...] = DEFAULT_QUANTILE_LEVELS
    seed: int = 0
    perturbations: tuple[PerturbationSpec, ...] = ()
    mase_scaling: str = "history"
    sample_count: int = DEFAULT_SAMPLE_COUNT
    parallelism: int | None = None
    adapters: dict = field(default_factory=dict)
    save_forecasts: bool = False
    series_csv: str | None = None

    def __post_init__(self) -> None:
        if not self.models:
            raise ConfigError("at least one model required")
        if len(set(self.models)) != len(self.models):
            raise ConfigError("duplicate model ids")
        if self.windows_per_period < 1:
            raise ConfigError("windows_per_period must be >= 1")
        if any(c < 1 for c in self.context_lengths):
            raise ConfigError("context lengths must be positive")
        if any(h < 1 for h in self.horizons):
            raise ConfigError("horizons must be positive")
        if self.mase_scaling not in MASE_SCALING_MODES:
            raise ConfigError(
                f"mase_scaling must be one of {MASE_SCALING_MODES}, got {self.mase_scaling!r}"
            )
        if self.sample_count < 2:
            raise ConfigError("sample_count must be >= 2")
        if not self.periods:
            raise ConfigError("at least one test period required")

    def to_dict(self) -> dict:
        return {
            "models": list(self.models),
            "context_lengths": list(self.context_lengths),
            "horizons": list(self.horizons),
            "periods": [
                {"name": p.name, "start": str(p.start) + "Z", "end": str(p.end) + "Z"}
                for p in self.periods
            ],
            "windows_per_period": self.windows_per_period,
            "quantile_levels": list(self.quantile_levels),
            "seed": self.seed,
            "perturbations": [
                {"missing_rate": p.missing_rate, "seed": p.seed} for p in self.perturbations
            ],
            "mase_scaling": self.mase_scaling,
            "sample_count": self.sample_count,
            "parallelism": self.parallelism,
            "adapters": {k: list(v) for k, v in sorted(self.adapters.items())},
            "save_forecasts": self.save_forecasts,
            "series_csv": self.series_csv,
        }


def default_config(**overrides) -> SweepConfig:
    """The full benchmark sweep: four adapter-served models plus the three
    native baselines over eight context lengths, two horizons, three
    periods, and seven windows."""
    named = default_periods()
    base = SweepConfig(
        models=ADAPTER_MODEL_IDS + NATIVE_MODEL_IDS,
        periods=(named["summer"], named["winter"], named["covid"]),
    )
    return replace(base, **overrides) if overrides else base


def _parse_period(entry, named: dict[str, TestPeriod]) -> TestPeriod:
    if isinstance(entry, str):
        if entry not in named:
            raise ConfigError(f"unknown period name {entry!r}; known: {sorted(named)}")
        return named[entry]
    if isinstance(entry, dict):
        try:
            return TestPeriod(
                entry["name"], parse_utc(str(entry["start"])), parse_utc(str(entry["end"]))
            )
        except KeyError as exc:
            raise ConfigError(f"period entry missing key {exc}") from None
    raise ConfigError(f"bad period entry {entry!r}")


def load_config(path) -> SweepConfig:
    """Load a sweep config from a YAML/JSON file."""
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> SweepConfig:
    named = default_periods()
    known = {
        "models",
        "context_lengths",
        "horizons",
        "periods",
        "windows_per_period",
        "quantile_levels",
        "seed",
        "perturbations",
        "mase_scaling",
        "sample_count",
        "parallelism",
        "adapters",
        "save_forecasts",
        "series_csv",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs: dict = {}
    if "models" in raw:
        kwargs["models"] = tuple(str(m) for m in raw["models"])
    else:
        raise ConfigError("config must list models")
    if "context_lengths" in raw:
        kwargs["context_lengths"] = tuple(int(c) for c in raw["context_lengths"])
    if "horizons" in raw:
        kwargs["horizons"] = tuple(int(h) for h in raw["horizons"])
    periods_raw = raw.get("periods", ["summer", "winter", "covid"])
    kwargs["periods"] = tuple(_parse_period(p, named) for p in periods_raw)
    for key in (
        "windows_per_period",
        "seed",
        "sample_count",
        "parallelism",
        "save_forecasts",
        "series_csv",
        "mase_scaling",
    ):
        if key in raw and raw[key] is not None:
            kwargs[key] = raw[key]
    if "quantile_levels" in raw:
        kwargs["quantile_levels"] = tuple(float(q) for q in raw["quantile_levels"])
    if "perturbations" in raw:
        kwargs["perturbations"] = tuple(
            PerturbationSpec(float(p["missing_rate"]), int(p.get("seed", 0)))
            for p in raw["perturbations"]
        )
    if "adapters" in raw:
        adapters = raw["adapters"] or {}
        kwargs["adapters"] = {str(k): [str(a) for a in v] for k, v in adapters.items()}
    return SweepConfig(**kwargs)
