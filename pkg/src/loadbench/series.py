"""Hourly load series: validation, CSV persistence, slicing, and perturbation.

Everything downstream consumes :class:`HourlySeries`, a strictly hourly,
gap-free, UTC-stamped sequence of non-negative megawatt values. Loaders are
responsible for turning raw inputs (CSV files, API responses) into series
that satisfy those invariants; explicit missing values are repaired by
linear interpolation at ingest and the repair count is kept on the series
so downstream runs can record it.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

logger = logging.getLogger(__name__)

HOUR = np.timedelta64(3600, "s")

PERIOD_NAMES = ("summer", "winter", "covid", "uri", "holiday", "recent")


class SeriesError(ValueError):
    """Raised when input data violates the hourly-series contract."""


def parse_utc(text: str) -> np.datetime64:
    """Parse an ISO-8601 UTC instant (``2023-07-01T00:00:00Z``) to datetime64[s]."""
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError as exc:
        raise SeriesError(f"bad timestamp {text!r}: {exc}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return np.datetime64(int(dt.timestamp()), "s")


def format_utc(ts: np.datetime64) -> str:
    """Render a datetime64 as ``YYYY-MM-DDTHH:MM:SSZ``."""
    return str(np.datetime64(ts, "s")) + "Z"


@dataclass
class HourlySeries:
    """A contiguous hourly sequence of load values in MW.

    Parameters
    ----------
    timestamps : np.ndarray
        datetime64[s] array, strictly increasing with exact 3600 s spacing.
    values : np.ndarray
        float64 array of non-negative, finite MW values, same length.
    series_id : str
        Opaque label, carried through slicing.
    repaired : int
        Number of points filled by interpolation at ingest.
    """

    timestamps: np.ndarray
    values: np.ndarray
    series_id: str = "series"
    repaired: int = 0

    def __post_init__(self) -> None:
        ts = np.asarray(self.timestamps, dtype="datetime64[s]")
        vals = np.asarray(self.values, dtype=np.float64)
        if ts.ndim != 1 or vals.ndim != 1:
            raise SeriesError("timestamps and values must be 1-d")
        if len(ts) != len(vals):
            raise SeriesError(f"length mismatch: {len(ts)} timestamps, {len(vals)} values")
        if len(ts) < 1:
            raise SeriesError("series must contain at least one point")
        if len(ts) > 1:
            steps = np.diff(ts)
            bad = np.nonzero(steps != HOUR)[0]
            if bad.size:
                i = int(bad[0])
                raise SeriesError(
                    f"non-hourly spacing at {format_utc(ts[i])} -> {format_utc(ts[i + 1])}"
                )
        if not np.all(np.isfinite(vals)):
            i = int(np.nonzero(~np.isfinite(vals))[0][0])
            raise SeriesError(f"non-finite value at {format_utc(ts[i])}")
        if np.any(vals < 0):
            i = int(np.nonzero(vals < 0)[0][0])
            raise SeriesError(f"negative load {vals[i]} at {format_utc(ts[i])}")
        # Shared freely across workers; guard against accidental mutation.
        ts.setflags(write=False)
        vals.setflags(write=False)
        self.timestamps = ts
        self.values = vals

    def __len__(self) -> int:
        return len(self.values)

    @property
    def start(self) -> np.datetime64:
        return self.timestamps[0]

    @property
    def end(self) -> np.datetime64:
        """Exclusive end: one hour past the last timestamp."""
        return self.timestamps[-1] + HOUR

    def index_of(self, ts: np.datetime64) -> int:
        """Index of the point stamped `ts`; raises if outside the span."""
        offset = (np.datetime64(ts, "s") - self.start) // HOUR
        if offset < 0 or offset >= len(self):
            raise SeriesError(
                f"{format_utc(ts)} outside series span "
                f"[{format_utc(self.start)}, {format_utc(self.end)})"
            )
        return int(offset)

    def window(self, start: np.datetime64, end: np.datetime64) -> "HourlySeries":
        """Sub-series covering [start, end)."""
        i = self.index_of(start)
        j = i + int((np.datetime64(end, "s") - np.datetime64(start, "s")) // HOUR)
        if j > len(self):
            raise SeriesError(
                f"requested window ends {format_utc(end)}, series ends {format_utc(self.end)}"
            )
        return HourlySeries(self.timestamps[i:j], self.values[i:j], self.series_id, 0)


@dataclass(frozen=True)
class TestPeriod:
    """Named evaluation period, end-exclusive."""

    name: str
    start: np.datetime64
    end: np.datetime64

    def __post_init__(self) -> None:
        if not self.start < self.end:
            raise SeriesError(f"period {self.name}: start must precede end")

    @property
    def hours(self) -> int:
        return int((self.end - self.start) // HOUR)


def default_periods() -> dict[str, TestPeriod]:
    """Calendar defaults for the named evaluation periods (UTC, end-exclusive)."""
    spans = {
        "summer": ("2023-07-01", "2023-09-01"),
        "winter": ("2022-12-01", "2023-03-01"),
        "covid": ("2020-03-01", "2020-05-01"),
        "uri": ("2021-02-10", "2021-02-21"),
        "holiday": ("2023-12-20", "2024-01-03"),
        "recent": ("2023-01-01", "2024-01-01"),
    }
    return {
        name: TestPeriod(name, parse_utc(a + "T00:00:00Z"), parse_utc(b + "T00:00:00Z"))
        for name, (a, b) in spans.items()
    }


@dataclass(frozen=True)
class PerturbationSpec:
    """Missing-data injection settings for robustness runs."""

    missing_rate: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.missing_rate <= 0.5:
            raise SeriesError(f"missing_rate {self.missing_rate} outside [0, 0.5]")

    @property
    def tag(self) -> str:
        return f"miss{self.missing_rate:g}s{self.seed}"


CSV_HEADER = ["timestamp_utc", "load_mw"]
_MISSING_TOKENS = {"", "nan", "null", "none", "na"}


def load_csv(path) -> HourlySeries:
    """Load an hourly series from the two-column CSV schema.

    Header must be ``timestamp_utc,load_mw``. Timestamps must be hourly
    contiguous (a skipped hour is an error, not an implicit gap); duplicate
    timestamps are rejected. Empty or NaN value fields are treated as
    explicit missing markers and repaired by linear interpolation; the
    repair count is stored on the returned series.
    """
    timestamps: list[np.datetime64] = []
    values: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CSV_HEADER:
            raise SeriesError(f"{path}: expected header {','.join(CSV_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise SeriesError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                ts = parse_utc(row[0].strip())
            except SeriesError as exc:
                raise SeriesError(f"{path}:{lineno}: {exc}") from None
            raw = row[1].strip()
            if raw.lower() in _MISSING_TOKENS:
                val = np.nan
            else:
                try:
                    val = float(raw)
                except ValueError:
                    raise SeriesError(f"{path}:{lineno}: bad load value {raw!r}") from None
            timestamps.append(ts)
            values.append(val)
    if not timestamps:
        raise SeriesError(f"{path}: no data rows")
    ts_arr = np.array(timestamps, dtype="datetime64[s]")
    _check_contiguous(ts_arr, source=str(path))
    vals, repaired = repair_missing(np.array(values, dtype=np.float64))
    if repaired:
        logger.info("%s: repaired %d missing value(s) by interpolation", path, repaired)
    return HourlySeries(ts_arr, vals, series_id=str(path), repaired=repaired)


def write_csv(series: HourlySeries, path) -> None:
    """Write a series in the canonical CSV schema (value round-trip exact)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for ts, val in zip(series.timestamps, series.values):
            writer.writerow([format_utc(ts), repr(float(val))])


def _check_contiguous(timestamps: np.ndarray, source: str) -> None:
    if len(timestamps) < 2:
        return
    steps = np.diff(timestamps)
    dupes = np.nonzero(steps <= np.timedelta64(0, "s"))[0]
    if dupes.size:
        i = int(dupes[0])
        if steps[i] == np.timedelta64(0, "s"):
            raise SeriesError(f"{source}: duplicate timestamp {format_utc(timestamps[i])}")
        raise SeriesError(
            f"{source}: timestamps not increasing at {format_utc(timestamps[i + 1])}"
        )
    gaps = np.nonzero(steps != HOUR)[0]
    if gaps.size:
        listing = ", ".join(
            f"{format_utc(timestamps[i])} -> {format_utc(timestamps[i + 1])}"
            for i in gaps[:5]
        )
        more = "" if gaps.size <= 5 else f" (+{gaps.size - 5} more)"
        raise SeriesError(f"{source}: {gaps.size} hourly gap(s): {listing}{more}")


def repair_missing(values: np.ndarray) -> tuple[np.ndarray, int]:
    """Fill NaN entries by linear interpolation between surviving neighbours.

    Endpoints fall back to the nearest finite value. Returns the repaired
    array and the number of filled points.
    """
    values = np.array(values, dtype=np.float64)
    missing = ~np.isfinite(values)
    n_missing = int(missing.sum())
    if n_missing == 0:
        return values, 0
    if n_missing == len(values):
        raise SeriesError("all values missing; nothing to interpolate from")
    idx = np.arange(len(values), dtype=np.float64)
    values[missing] = np.interp(idx[missing], idx[~missing], values[~missing])
    return values, n_missing


def slice_context(series: HourlySeries, origin: np.datetime64, context_len: int) -> HourlySeries:
    """The `context_len` consecutive points ending just before `origin`.

    The slice covers [origin - context_len h, origin); the last point is
    stamped origin - 1h.
    """
    if context_len < 1:
        raise SeriesError(f"context_len must be >= 1, got {context_len}")
    origin = np.datetime64(origin, "s")
    start = origin - context_len * HOUR
    if start < series.start or origin > series.end:
        raise SeriesError(
            f"insufficient history: need [{format_utc(start)}, {format_utc(origin)}), "
            f"series covers [{format_utc(series.start)}, {format_utc(series.end)})"
        )
    return series.window(start, origin)


def inject_missing(series: HourlySeries, spec: PerturbationSpec) -> HourlySeries:
    """Remove a seeded random fraction of interior points and re-interpolate.

    Exactly ``round(rate * len)`` interior indices are drawn uniformly
    without replacement; the first and last points are never removed.
    Deterministic for a fixed spec.
    """
    n = len(series)
    if n < 3:
        raise SeriesError("series too short to perturb (need >= 3 points)")
    k = int(round(spec.missing_rate * n))
    if k == 0:
        return series
    k = min(k, n - 2)
    rng = np.random.default_rng(spec.seed)
    drop = rng.choice(np.arange(1, n - 1), size=k, replace=False)
    values = np.array(series.values, dtype=np.float64)
    values[drop] = np.nan
    repaired, _ = repair_missing(values)
    return HourlySeries(series.timestamps, repaired, series.series_id, repaired=k)


def extreme_mask(series: HourlySeries, reference: HourlySeries) -> np.ndarray:
    """Label each point high/low/normal against the reference distribution.

    ``high`` for values strictly above the reference's 95th percentile,
    ``low`` for values strictly below its 5th; percentiles use the
    linear-interpolated empirical quantile.
    """
    if len(reference) < 20:
        raise SeriesError(f"reference too short for stable percentiles: {len(reference)} < 20")
    lo, hi = np.quantile(reference.values, [0.05, 0.95])
    labels = np.full(len(series), "normal", dtype=object)
    labels[series.values > hi] = "high"
    labels[series.values < lo] = "low"
    return labels
