"""Adapter wire protocol (version 1) and the subprocess client.

Adapters are child processes exchanging newline-delimited UTF-8 JSON over
their standard streams. The harness sends a hello, the adapter answers with
model metadata, and forecast requests then flow one at a time; an adapter
process never sees a second request before answering the first. Numbers
travel as JSON decimal text; quantile matrices are row-major H x levels.
"""

from __future__ import annotations

import json
import logging
import subprocess
import threading
import time

import numpy as np

from .forecast import Forecaster, ForecastFailure, ForecastTask, ProbabilisticForecast
from .series import format_utc

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
RESTART_LIMIT = 2


class AdapterError(RuntimeError):
    """Transport or protocol failure talking to an adapter process."""


def hello_message() -> dict:
    return {"type": "hello", "protocol": PROTOCOL_VERSION}


def forecast_request(task_id, timestamps, values, horizon, quantile_levels) -> dict:
    return {
        "type": "forecast",
        "task_id": task_id,
        "timestamps": list(timestamps),
        "values": [float(v) for v in values],
        "horizon": int(horizon),
        "quantile_levels": [float(q) for q in quantile_levels],
    }


def validate_model_info(message: dict) -> dict:
    if message.get("type") != "model_info":
        raise AdapterError(f"expected model_info handshake, got {message.get('type')!r}")
    if "model_id" not in message:
        raise AdapterError("model_info missing model_id")
    levels = message.get("quantile_levels")
    if levels is None or not isinstance(levels, list):
        raise AdapterError("model_info missing quantile_levels list")
    return message


class AdapterClient:
    """Owns one adapter subprocess; restarts it on crashes (bounded)."""

    def __init__(self, command: list[str], restart_limit: int = RESTART_LIMIT):
        self.command = list(command)
        self.restart_limit = restart_limit
        self.process: subprocess.Popen | None = None
        self.model_info: dict | None = None
        # Reentrant: the forecaster wrapper holds it across handshake + request.
        self.lock = threading.RLock()

    def start(self) -> dict:
        """Launch the process and perform the handshake."""
        try:
            self.process = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=None,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise AdapterError(f"cannot launch adapter {self.command}: {exc}") from None
        self._send(hello_message())
        self.model_info = validate_model_info(self._recv())
        logger.info(
            "adapter up: %s (grid of %d levels)",
            self.model_info["model_id"],
            len(self.model_info["quantile_levels"]),
        )
        return self.model_info

    def _send(self, obj: dict) -> None:
        proc = self.process
        if proc is None or proc.poll() is not None:
            raise AdapterError("adapter process is not running")
        try:
            proc.stdin.write(json.dumps(obj) + "\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise AdapterError(f"adapter write failed: {exc}") from None

    def _recv(self) -> dict:
        proc = self.process
        if proc is None:
            raise AdapterError("adapter process is not running")
        line = proc.stdout.readline()
        if not line:
            raise AdapterError("adapter closed its output stream")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise AdapterError(f"bad protocol line from adapter: {exc}") from None

    def forecast(self, request: dict) -> dict:
        """Send one forecast request; returns the forecast_result message.

        A crashed adapter is restarted and the request retried, at most
        ``restart_limit`` times; an explicit protocol error message becomes
        a ForecastFailure (the task failed, the adapter lives on).
        """
        attempts = 0
        while True:
            try:
                if self.process is None or self.process.poll() is not None:
                    self.start()
                self._send(request)
                response = self._recv()
                break
            except AdapterError:
                attempts += 1
                self.close()
                if attempts > self.restart_limit:
                    raise
                logger.warning(
                    "adapter crashed; restart %d/%d", attempts, self.restart_limit
                )
        if response.get("type") == "error":
            raise ForecastFailure(
                self.model_info["model_id"] if self.model_info else "adapter",
                str(response.get("message", "adapter error")),
            )
        if response.get("type") != "forecast_result":
            raise AdapterError(f"unexpected message type {response.get('type')!r}")
        if response.get("task_id") != request["task_id"]:
            raise AdapterError(
                f"response task {response.get('task_id')!r} != request {request['task_id']!r}"
            )
        return response

    def close(self) -> None:
        proc = self.process
        self.process = None
        if proc is None:
            return
        try:
            if proc.stdin:
                proc.stdin.close()
            proc.terminate()
            proc.wait(timeout=5)
        except Exception:
            proc.kill()


class AdapterForecaster(Forecaster):
    """Forecaster backed by an adapter subprocess over the wire protocol."""

    kind = "external-adapter"

    def __init__(self, model_id: str, client: AdapterClient):
        self.model_id = model_id
        self.client = client

    def ensure_started(self) -> dict:
        with self.client.lock:
            if self.client.model_info is None:
                info = self.client.start()
                if info["model_id"] != self.model_id:
                    raise AdapterError(
                        f"adapter announced {info['model_id']!r}, expected {self.model_id!r}"
                    )
            return self.client.model_info

    def forecast(self, task: ForecastTask, seed: int = 0) -> ProbabilisticForecast:
        request = forecast_request(
            task_id=task.task_id
            or f"{self.model_id}-{format_utc(task.origin)}-{time.monotonic_ns()}",
            timestamps=[format_utc(ts) for ts in task.context.timestamps],
            values=task.context.values,
            horizon=task.horizon,
            quantile_levels=task.quantile_levels,
        )
        with self.client.lock:
            info = self.ensure_started()
            response = self.client.forecast(request)
        point = np.asarray(response["point"], dtype=np.float64)
        if point.shape != (task.horizon,):
            raise AdapterError(f"point length {point.shape} != horizon {task.horizon}")
        quantiles = response.get("quantiles")
        flags = []
        if response.get("includes_fit"):
            flags.append("includes_fit")
        if quantiles is None:
            flags.append("point_only")
            return ProbabilisticForecast(
                point=point,
                inference_seconds=float(response.get("inference_seconds", 0.0)),
                flags=tuple(flags),
            )
        q = np.asarray(quantiles, dtype=np.float64)
        if q.shape != (task.horizon, len(task.quantile_levels)):
            raise AdapterError(
                f"quantile matrix {q.shape} != ({task.horizon}, {len(task.quantile_levels)})"
            )
        return ProbabilisticForecast(
            point=point,
            quantiles=q,
            levels=task.quantile_levels,
            inference_seconds=float(response.get("inference_seconds", 0.0)),
            flags=tuple(flags),
        )
