"""The serve loop: newline-delimited JSON requests on stdin, responses on
stdout, logging strictly to stderr.

Handshake: the harness sends ``{"type": "hello", "protocol": 1}``; the
adapter replies with model metadata (or an error when the model cannot be
loaded, then exits). Forecast requests arrive one at a time; a request that
blows up produces an error message and the process keeps serving.
"""

from __future__ import annotations

import json
import logging
import sys

import numpy as np

from .backends import AdapterConfig, Backend, BackendUnavailable, load_backend

logger = logging.getLogger("load_adapters")

PROTOCOL_VERSION = 1


def _emit(stdout, message: dict) -> None:
    stdout.write(json.dumps(message) + "\n")
    stdout.flush()


def _monotone_repair(quantiles: np.ndarray) -> tuple[np.ndarray, int]:
    crossing = np.any(np.diff(quantiles, axis=1) < 0, axis=1)
    if crossing.any():
        return np.sort(quantiles, axis=1), int(crossing.sum())
    return quantiles, 0


def handle_forecast(backend: Backend, request: dict) -> dict:
    task_id = request.get("task_id")
    values = np.asarray(request["values"], dtype=np.float64)
    horizon = int(request["horizon"])
    levels = [float(q) for q in request["quantile_levels"]]
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if values.size < 1 or not np.all(np.isfinite(values)):
        raise ValueError("context values must be non-empty and finite")
    output = backend.forecast(values, horizon, levels)
    reply = {
        "type": "forecast_result",
        "task_id": task_id,
        "point": [float(v) for v in output.point],
        "quantiles": None,
        "inference_seconds": output.inference_seconds,
    }
    if output.includes_fit:
        reply["includes_fit"] = True
    if output.quantiles is not None:
        repaired, count = _monotone_repair(np.asarray(output.quantiles, dtype=np.float64))
        if count:
            logger.warning("repaired quantile crossings on %d step(s)", count)
        reply["quantiles"] = [[float(v) for v in row] for row in repaired]
    return reply


def serve(config: AdapterConfig, stdin=None, stdout=None, backend_factory=load_backend) -> int:
    """Run the protocol loop until stdin closes. Returns the exit code."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    try:
        backend = backend_factory(config)
        load_error = None
    except BackendUnavailable as exc:
        backend = None
        load_error = str(exc)

    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            _emit(stdout, {"type": "error", "task_id": None, "message": f"bad json: {exc}"})
            continue
        kind = message.get("type")
        if kind == "hello":
            if message.get("protocol") != PROTOCOL_VERSION:
                _emit(
                    stdout,
                    {
                        "type": "error",
                        "task_id": None,
                        "message": f"unsupported protocol {message.get('protocol')!r}",
                    },
                )
                return 1
            if backend is None:
                _emit(stdout, {"type": "error", "task_id": None, "message": load_error})
                return 1
            _emit(stdout, backend.model_info())
            logger.info("serving %s", backend.model_id)
            continue
        if kind == "forecast":
            if backend is None:
                _emit(
                    stdout,
                    {
                        "type": "error",
                        "task_id": message.get("task_id"),
                        "message": load_error,
                    },
                )
                return 1
            try:
                _emit(stdout, handle_forecast(backend, message))
            except Exception as exc:
                logger.exception("request failed")
                _emit(
                    stdout,
                    {
                        "type": "error",
                        "task_id": message.get("task_id"),
                        "message": f"{type(exc).__name__}: {exc}",
                    },
                )
            continue
        _emit(
            stdout,
            {
                "type": "error",
                "task_id": message.get("task_id"),
                "message": f"unknown message type {kind!r}",
            },
        )
    return 0
