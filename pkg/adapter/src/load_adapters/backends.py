"""Model backends behind the protocol loop.

Each backend wraps one pre-trained (or fitted-per-request) producer and
normalizes it to: a point path plus either a quantile matrix on the
requested levels or nothing at all (point-only). Heavy libraries import
lazily so the adapter package installs without any of them; a missing
library surfaces as a handshake error, never an import-time crash.

Every request re-seeds the backend's generators from the process seed, so
identical requests produce identical responses regardless of order.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

import numpy as np

CHRONOS_BOLT_LEVELS = tuple(round(0.1 * i, 1) for i in range(1, 10))
CHRONOS2_LEVELS = tuple(round(level, 3) for level in np.linspace(0.05, 0.95, 21))
MOIRAI_LEVELS = tuple(round(0.05 * i, 2) for i in range(1, 20))
PROPHET_LEVELS = (0.05, 0.5, 0.95)

MODEL_IDS = ("chronos-bolt-small", "chronos-2", "moirai-2-small", "ttm-r2", "prophet")

HUB_NAMES = {
    "chronos-bolt-small": "amazon/chronos-bolt-small",
    "chronos-2": "amazon/chronos-2",
    "moirai-2-small": "Salesforce/moirai-2.0-R-small",
    "ttm-r2": "ibm-granite/granite-timeseries-ttm-r2",
}


class BackendUnavailable(RuntimeError):
    """The model (library or weights) cannot be loaded on this host."""


@dataclass
class AdapterConfig:
    model_id: str
    seed: int = 0
    device: str = "cpu"
    cache_dir: str | None = None
    offline: bool = False

    def __post_init__(self) -> None:
        if self.device != "cpu":
            raise BackendUnavailable("adapters run cpu-only")


@dataclass
class ForecastOutput:
    point: np.ndarray
    quantiles: np.ndarray | None  # on the requested levels, or None
    inference_seconds: float
    includes_fit: bool = False


def interp_levels(native_levels, native_values, requested_levels) -> np.ndarray:
    """Per-step linear re-gridding with constant extrapolation at the ends."""
    native_levels = np.asarray(native_levels, dtype=np.float64)
    requested = np.asarray(requested_levels, dtype=np.float64)
    native_values = np.asarray(native_values, dtype=np.float64)
    out = np.empty((native_values.shape[0], requested.size))
    for h in range(native_values.shape[0]):
        out[h] = np.interp(requested, native_levels, native_values[h])
    return out


class Backend:
    model_id: str
    native_levels: tuple[float, ...]
    parameter_count: int | None = None
    resolved_version: str | None = None

    def __init__(self, config: AdapterConfig):
        self.config = config

    def model_info(self) -> dict:
        return {
            "type": "model_info",
            "model_id": self.model_id,
            "quantile_levels": list(self.native_levels),
            "parameter_count": self.parameter_count,
            "resolved_version": self.resolved_version,
            "seed": self.config.seed,
        }

    def forecast(self, values: np.ndarray, horizon: int, levels) -> ForecastOutput:
        raise NotImplementedError


def _apply_hub_env(config: AdapterConfig) -> None:
    if config.cache_dir:
        os.environ.setdefault("HF_HOME", config.cache_dir)
    if config.offline:
        os.environ["HF_HUB_OFFLINE"] = "1"
        os.environ["TRANSFORMERS_OFFLINE"] = "1"


class _TorchQuantileBackend(Backend):
    """Shared machinery for torch-based producers with native quantile grids."""

    def _seed_torch(self):
        import torch

        torch.manual_seed(self.config.seed)
        np.random.seed(self.config.seed % (2**32))

    def _predict_native(self, values: np.ndarray, horizon: int) -> np.ndarray:
        raise NotImplementedError

    def forecast(self, values, horizon, levels) -> ForecastOutput:
        t0 = time.perf_counter()
        self._seed_torch()
        native = self._predict_native(np.asarray(values, dtype=np.float32), horizon)
        quantiles = interp_levels(self.native_levels, native, levels)
        median = interp_levels(self.native_levels, native, [0.5])[:, 0]
        return ForecastOutput(
            point=median,
            quantiles=quantiles,
            inference_seconds=time.perf_counter() - t0,
        )


class ChronosBoltBackend(_TorchQuantileBackend):
    model_id = "chronos-bolt-small"
    native_levels = CHRONOS_BOLT_LEVELS

    def __init__(self, config: AdapterConfig):
        super().__init__(config)
        _apply_hub_env(config)
        try:
            import torch
            from chronos import BaseChronosPipeline
        except ImportError as exc:
            raise BackendUnavailable(
                f"chronos-forecasting not installed ({exc}); "
                "pip install 'load-adapters[chronos]'"
            ) from None
        try:
            self.pipeline = BaseChronosPipeline.from_pretrained(
                HUB_NAMES[self.model_id], device_map="cpu", torch_dtype=torch.float32
            )
        except Exception as exc:
            raise BackendUnavailable(f"cannot load {HUB_NAMES[self.model_id]}: {exc}") from None
        self.parameter_count = sum(p.numel() for p in self.pipeline.inner_model.parameters())
        self.resolved_version = HUB_NAMES[self.model_id]

    def _predict_native(self, values, horizon):
        import torch

        context = torch.tensor(values, dtype=torch.float32).unsqueeze(0)
        quantiles, _ = self.pipeline.predict_quantiles(
            context, prediction_length=horizon, quantile_levels=list(self.native_levels)
        )
        return quantiles[0].cpu().numpy()  # horizon x levels


class Chronos2Backend(ChronosBoltBackend):
    model_id = "chronos-2"
    native_levels = CHRONOS2_LEVELS


class MoiraiBackend(_TorchQuantileBackend):
    model_id = "moirai-2-small"
    native_levels = MOIRAI_LEVELS

    def __init__(self, config: AdapterConfig):
        super().__init__(config)
        _apply_hub_env(config)
        try:
            from uni2ts.model.moirai2 import Moirai2Forecast, Moirai2Module
        except ImportError as exc:
            raise BackendUnavailable(
                f"uni2ts not installed ({exc}); pip install 'load-adapters[moirai]'"
            ) from None
        try:
            self.module = Moirai2Module.from_pretrained(HUB_NAMES[self.model_id])
        except Exception as exc:
            raise BackendUnavailable(f"cannot load {HUB_NAMES[self.model_id]}: {exc}") from None
        self._forecast_cls = Moirai2Forecast
        self.resolved_version = HUB_NAMES[self.model_id]

    def _predict_native(self, values, horizon):
        import torch

        model = self._forecast_cls(
            module=self.module,
            prediction_length=horizon,
            context_length=len(values),
            target_dim=1,
            feat_dynamic_real_dim=0,
            past_feat_dynamic_real_dim=0,
        )
        predictor = model.create_predictor(batch_size=1)
        import pandas as pd
        from gluonts.dataset.pandas import PandasDataset

        index = pd.date_range("2000-01-01", periods=len(values), freq="h")
        ds = PandasDataset(pd.DataFrame({"target": values}, index=index))
        forecast = next(iter(predictor.predict(ds)))
        rows = [forecast.quantile(q) for q in self.native_levels]
        return np.stack(rows, axis=1)


class TtmBackend(Backend):
    model_id = "ttm-r2"
    native_levels = ()  # point only; the engine synthesizes uncertainty

    def __init__(self, config: AdapterConfig):
        super().__init__(config)
        _apply_hub_env(config)
        try:
            import torch
            from tsfm_public.models.tinytimemixer import TinyTimeMixerForPrediction
        except ImportError as exc:
            raise BackendUnavailable(
                f"granite-tsfm not installed ({exc}); pip install 'load-adapters[ttm]'"
            ) from None
        try:
            self.model = TinyTimeMixerForPrediction.from_pretrained(HUB_NAMES[self.model_id])
        except Exception as exc:
            raise BackendUnavailable(f"cannot load {HUB_NAMES[self.model_id]}: {exc}") from None
        self.model.eval()
        self.parameter_count = sum(p.numel() for p in self.model.parameters())
        self.resolved_version = HUB_NAMES[self.model_id]

    def forecast(self, values, horizon, levels) -> ForecastOutput:
        import torch

        t0 = time.perf_counter()
        torch.manual_seed(self.config.seed)
        needed = self.model.config.context_length
        series = np.asarray(values, dtype=np.float32)
        if len(series) < needed:  # left-pad by repeating the first value
            series = np.concatenate([np.full(needed - len(series), series[0]), series])
        window = torch.tensor(series[-needed:], dtype=torch.float32).reshape(1, -1, 1)
        with torch.no_grad():
            out = self.model(past_values=window)
        path = out.prediction_outputs[0, :, 0].cpu().numpy()
        if len(path) < horizon:  # autoregressive extension for long horizons
            tail = list(series)
            point = []
            remaining = horizon
            while remaining > 0:
                window = torch.tensor(tail[-needed:], dtype=torch.float32).reshape(1, -1, 1)
                with torch.no_grad():
                    chunk = self.model(past_values=window).prediction_outputs[0, :, 0]
                chunk = chunk.cpu().numpy()
                take = min(len(chunk), remaining)
                point.extend(chunk[:take])
                tail.extend(chunk[:take])
                remaining -= take
            path = np.asarray(point)
        return ForecastOutput(
            point=path[:horizon].astype(np.float64),
            quantiles=None,
            inference_seconds=time.perf_counter() - t0,
        )


class ProphetBackend(Backend):
    """Fitted-at-invocation industry baseline: multiplicative seasonality,
    90% intervals; timing covers fit plus predict and is flagged as such."""

    model_id = "prophet"
    native_levels = PROPHET_LEVELS

    def __init__(self, config: AdapterConfig):
        super().__init__(config)
        try:
            import pandas  # noqa: F401
            from prophet import Prophet  # noqa: F401
        except ImportError as exc:
            raise BackendUnavailable(
                f"prophet not installed ({exc}); pip install 'load-adapters[prophet]'"
            ) from None
        import prophet

        self.resolved_version = f"prophet {prophet.__version__}"

    def forecast(self, values, horizon, levels) -> ForecastOutput:
        import pandas as pd
        from prophet import Prophet

        t0 = time.perf_counter()
        np.random.seed(self.config.seed % (2**32))
        frame = pd.DataFrame(
            {
                "ds": pd.date_range("2000-01-01", periods=len(values), freq="h"),
                "y": np.asarray(values, dtype=np.float64),
            }
        )
        model = Prophet(
            seasonality_mode="multiplicative",
            interval_width=0.90,
            daily_seasonality=True,
            weekly_seasonality=True,
            yearly_seasonality=False,
        )
        model.fit(frame)
        future = model.make_future_dataframe(periods=horizon, freq="h")
        prediction = model.predict(future).iloc[-horizon:]
        native = np.column_stack(
            [prediction["yhat_lower"], prediction["yhat"], prediction["yhat_upper"]]
        )
        quantiles = interp_levels(self.native_levels, native, levels)
        return ForecastOutput(
            point=prediction["yhat"].to_numpy(),
            quantiles=quantiles,
            inference_seconds=time.perf_counter() - t0,
            includes_fit=True,
        )


class StubNaiveBackend(Backend):
    """Deterministic test backend (enabled only via environment flag): a
    daily repeater with a spread proportional to the context scale."""

    model_id = "stub-naive"
    native_levels = (0.1, 0.5, 0.9)
    parameter_count = 0

    def forecast(self, values, horizon, levels) -> ForecastOutput:
        t0 = time.perf_counter()
        values = np.asarray(values, dtype=np.float64)
        lag = min(24, len(values))
        point = values[len(values) - lag + (np.arange(horizon) % lag)]
        spread = 0.05 * float(np.mean(np.abs(values)))
        native = point[:, None] + spread * 4.0 * (np.asarray(self.native_levels) - 0.5)
        return ForecastOutput(
            point=point,
            quantiles=interp_levels(self.native_levels, native, levels),
            inference_seconds=time.perf_counter() - t0,
        )


BACKENDS = {
    "chronos-bolt-small": ChronosBoltBackend,
    "chronos-2": Chronos2Backend,
    "moirai-2-small": MoiraiBackend,
    "ttm-r2": TtmBackend,
    "prophet": ProphetBackend,
}

STUB_ENV_FLAG = "LOAD_ADAPTERS_ENABLE_STUB"


def load_backend(config: AdapterConfig) -> Backend:
    registry = dict(BACKENDS)
    if os.environ.get(STUB_ENV_FLAG):
        registry["stub-naive"] = StubNaiveBackend
    if config.model_id not in registry:
        raise BackendUnavailable(
            f"unknown model {config.model_id!r}; known: {sorted(registry)}"
        )
    return registry[config.model_id](config)
