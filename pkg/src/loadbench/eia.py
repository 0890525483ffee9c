"""EIA Open Data client for hourly ERCOT system demand.

Fetched spans are cached as canonical CSV files, one per requested
(start, end) pair, so repeated runs and other tooling read identical
fixtures without touching the network. Missing hours inside a response are
repaired by interpolation up to a configurable limit; anything worse is a
validation error listing the gaps.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from pathlib import Path

import numpy as np
import requests

from .series import (
    HOUR,
    HourlySeries,
    SeriesError,
    format_utc,
    load_csv,
    repair_missing,
    write_csv,
)

logger = logging.getLogger(__name__)

API_URL = "https://api.eia.gov/v2/electricity/rto/region-data/data/"
RESPONDENT = "ERCO"
PAGE_ROWS = 5000
MAX_RETRIES = 5
API_KEY_ENV = "EIA_API_KEY"
DEFAULT_CACHE_DIR = Path("data/cache")

_key_locks: dict[str, threading.Lock] = {}
_key_locks_guard = threading.Lock()


class FetchError(RuntimeError):
    """Retriable transport or API failure; carries the last HTTP status."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


def cache_path(start: np.datetime64, end: np.datetime64, cache_dir=DEFAULT_CACHE_DIR) -> Path:
    a = format_utc(start).replace(":", "")
    b = format_utc(end).replace(":", "")
    return Path(cache_dir) / f"eia_{RESPONDENT}_{a}_{b}.csv"


def _single_flight(key: str) -> threading.Lock:
    with _key_locks_guard:
        return _key_locks.setdefault(key, threading.Lock())


def _request_page(session, params: dict) -> dict:
    delay = 1.0
    last_status = None
    for attempt in range(MAX_RETRIES):
        try:
            resp = session.get(API_URL, params=params, timeout=60)
            last_status = resp.status_code
            if resp.status_code == 200:
                return resp.json()
            if resp.status_code in (401, 403):
                raise FetchError(
                    f"EIA API auth failure (HTTP {resp.status_code})", resp.status_code
                )
        except FetchError:
            raise
        except requests.RequestException as exc:
            logger.warning("EIA request failed (%s), attempt %d", exc, attempt + 1)
        if attempt < MAX_RETRIES - 1:
            time.sleep(delay)
            delay *= 2.0
    raise FetchError(f"EIA API unreachable after {MAX_RETRIES} attempts", last_status)


def fetch_eia(
    start,
    end,
    api_key: str | None = None,
    cache_dir=DEFAULT_CACHE_DIR,
    session=None,
    max_gap_hours: int = 6,
) -> HourlySeries:
    """Fetch hourly ERCOT demand over [start, end), caching the result as CSV.

    The API key defaults to the ``EIA_API_KEY`` environment variable.
    Repeated calls for the same span return the cached file without a
    request; concurrent callers for one span share a single fetch. Runs of
    missing hours up to ``max_gap_hours`` are filled by interpolation (and
    counted on the series); longer runs raise a validation error.
    """
    start = np.datetime64(start, "s")
    end = np.datetime64(end, "s")
    if not end > start:
        raise SeriesError(f"end {format_utc(end)} must follow start {format_utc(start)}")
    path = cache_path(start, end, cache_dir)
    with _single_flight(str(path)):
        if path.exists():
            logger.info("cache hit: %s", path)
            return load_csv(path)
        api_key = api_key or os.environ.get(API_KEY_ENV)
        if not api_key:
            raise FetchError(f"no API key: pass api_key or set {API_KEY_ENV}")
        session = session or requests.Session()
        series = _fetch_span(session, api_key, start, end, max_gap_hours)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_csv(series, path)
        logger.info("cached %d points to %s", len(series), path)
        return series


def _fetch_span(session, api_key, start, end, max_gap_hours) -> HourlySeries:
    n_hours = int((end - start) // HOUR)
    params = {
        "api_key": api_key,
        "frequency": "hourly",
        "data[0]": "value",
        "facets[respondent][]": RESPONDENT,
        "facets[type][]": "D",
        "start": str(np.datetime64(start, "h")),
        "end": str(np.datetime64(end - HOUR, "h")),
        "sort[0][column]": "period",
        "sort[0][direction]": "asc",
        "length": PAGE_ROWS,
    }
    rows: dict[np.datetime64, float] = {}
    offset = 0
    while True:
        page = dict(params, offset=offset)
        payload = _request_page(session, page)
        data = payload.get("response", {}).get("data", [])
        if not data:
            break
        for item in data:
            ts = np.datetime64(item["period"], "s")
            raw = item.get("value")
            val = float(raw) if raw is not None else np.nan
            rows[ts] = val
        offset += len(data)
        if len(data) < PAGE_ROWS:
            break
    if not rows:
        raise FetchError("EIA API returned no rows for the requested span")

    timestamps = start + np.arange(n_hours) * HOUR
    values = np.full(n_hours, np.nan)
    for i, ts in enumerate(timestamps):
        if ts in rows:
            values[i] = rows[ts]
    _check_gap_runs(timestamps, values, max_gap_hours)
    repaired_values, n_repaired = repair_missing(values)
    if n_repaired:
        logger.info("repaired %d missing hour(s) by interpolation", n_repaired)
    return HourlySeries(
        timestamps,
        repaired_values,
        series_id=f"eia-{RESPONDENT}",
        repaired=n_repaired,
    )


def _check_gap_runs(timestamps, values, max_gap_hours: int) -> None:
    missing = ~np.isfinite(values)
    if not missing.any():
        return
    gaps = []
    run_start = None
    for i, miss in enumerate(missing):
        if miss and run_start is None:
            run_start = i
        elif not miss and run_start is not None:
            gaps.append((run_start, i))
            run_start = None
    if run_start is not None:
        gaps.append((run_start, len(values)))
    long_runs = [(a, b) for a, b in gaps if b - a > max_gap_hours]
    if long_runs:
        listing = ", ".join(
            f"{format_utc(timestamps[a])}..{format_utc(timestamps[b - 1])} ({b - a} h)"
            for a, b in long_runs[:5]
        )
        raise SeriesError(
            f"response not hourly-contiguous: {len(long_runs)} gap run(s) "
            f"longer than {max_gap_hours} h: {listing}"
        )
