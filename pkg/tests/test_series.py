import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loadbench.series import (
    HOUR,
    HourlySeries,
    PerturbationSpec,
    SeriesError,
    default_periods,
    extreme_mask,
    format_utc,
    inject_missing,
    load_csv,
    parse_utc,
    slice_context,
    write_csv,
)

from .conftest import make_series, synthetic_load


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestHourlySeries:
    def test_valid_construction(self):
        s = make_series([1.0, 2.0, 3.0])
        assert len(s) == 3
        assert s.end - s.start == 3 * HOUR

    def test_rejects_empty(self):
        with pytest.raises(SeriesError):
            make_series([])

    def test_rejects_gap_spacing(self):
        t0 = parse_utc("2022-01-01T00:00:00Z")
        ts = np.array([t0, t0 + HOUR, t0 + 3 * HOUR], dtype="datetime64[s]")
        with pytest.raises(SeriesError, match="non-hourly"):
            HourlySeries(ts, np.array([1.0, 2.0, 3.0]))

    def test_rejects_negative_and_nonfinite(self):
        with pytest.raises(SeriesError, match="negative"):
            make_series([1.0, -2.0])
        with pytest.raises(SeriesError, match="non-finite"):
            make_series([1.0, np.nan])

    def test_values_are_read_only(self):
        s = make_series([1.0, 2.0])
        with pytest.raises(ValueError):
            s.values[0] = 5.0


class TestCsv:
    def test_three_row_file(self, tmp_path):
        path = tmp_path / "ok.csv"
        write_lines(
            path,
            [
                "timestamp_utc,load_mw",
                "2023-07-01T00:00:00Z,41000.5",
                "2023-07-01T01:00:00Z,40250.0",
                "2023-07-01T02:00:00Z,39900.25",
            ],
        )
        s = load_csv(path)
        assert len(s) == 3
        assert s.values[2] == 39900.25

    def test_duplicate_hour_names_timestamp(self, tmp_path):
        path = tmp_path / "dup.csv"
        write_lines(
            path,
            [
                "timestamp_utc,load_mw",
                "2023-07-01T00:00:00Z,41000",
                "2023-07-01T00:00:00Z,41001",
            ],
        )
        with pytest.raises(SeriesError, match="2023-07-01T00:00:00Z"):
            load_csv(path)

    def test_skipped_hour_lists_gap(self, tmp_path):
        path = tmp_path / "gap.csv"
        write_lines(
            path,
            [
                "timestamp_utc,load_mw",
                "2023-07-01T00:00:00Z,41000",
                "2023-07-01T02:00:00Z,41001",
            ],
        )
        with pytest.raises(SeriesError, match="gap"):
            load_csv(path)

    def test_malformed_value_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        write_lines(
            path,
            [
                "timestamp_utc,load_mw",
                "2023-07-01T00:00:00Z,41000",
                "2023-07-01T01:00:00Z,oops",
            ],
        )
        with pytest.raises(SeriesError, match=":3"):
            load_csv(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "hdr.csv"
        write_lines(path, ["time,mw", "2023-07-01T00:00:00Z,1"])
        with pytest.raises(SeriesError, match="header"):
            load_csv(path)

    def test_missing_markers_repaired_and_counted(self, tmp_path):
        path = tmp_path / "miss.csv"
        write_lines(
            path,
            [
                "timestamp_utc,load_mw",
                "2023-07-01T00:00:00Z,10",
                "2023-07-01T01:00:00Z,",
                "2023-07-01T02:00:00Z,30",
            ],
        )
        s = load_csv(path)
        assert s.repaired == 1
        assert s.values[1] == 20.0

    def test_round_trip_value_exact(self, tmp_path):
        rng = np.random.default_rng(7)
        original = make_series(rng.uniform(20000, 90000, size=50))
        path = tmp_path / "rt.csv"
        write_csv(original, path)
        reloaded = load_csv(path)
        assert np.array_equal(original.values, reloaded.values)
        assert np.array_equal(original.timestamps, reloaded.timestamps)


class TestSliceContext:
    def test_insufficient_history(self):
        s = make_series([1, 2, 3, 4, 5])
        origin = s.timestamps[4]
        with pytest.raises(SeriesError, match="insufficient history"):
            slice_context(s, origin, 24)

    def test_last_point_is_origin_minus_one_hour(self, week_series):
        origin = week_series.timestamps[300]
        ctx = slice_context(week_series, origin, 24)
        assert ctx.timestamps[-1] == origin - HOUR
        assert len(ctx) == 24

    @pytest.mark.parametrize("context_len", [24, 48, 96, 168, 336, 512, 1024, 2048])
    def test_length_for_every_context(self, context_len):
        s = synthetic_load(2048 + 10)
        origin = s.timestamps[2048]
        assert len(slice_context(s, origin, context_len)) == context_len

    def test_nested_slice_equals_inner(self, week_series):
        origin = week_series.end
        outer = slice_context(week_series, origin, 200)
        inner_direct = slice_context(week_series, origin, 24)
        inner_nested = slice_context(outer, origin, 24)
        assert np.array_equal(inner_direct.values, inner_nested.values)
        assert np.array_equal(inner_direct.timestamps, inner_nested.timestamps)


class TestInjectMissing:
    def test_rate_zero_identity(self, week_series):
        out = inject_missing(week_series, PerturbationSpec(0.0, seed=3))
        assert np.array_equal(out.values, week_series.values)

    def test_linear_ramp_reconstructed_exactly(self):
        ramp = make_series(np.linspace(100.0, 500.0, 60))
        out = inject_missing(ramp, PerturbationSpec(0.2, seed=11))
        assert np.allclose(out.values, ramp.values, rtol=0, atol=1e-9)

    def test_deterministic_for_fixed_seed(self, week_series):
        spec = PerturbationSpec(0.15, seed=42)
        a = inject_missing(week_series, spec)
        b = inject_missing(week_series, spec)
        assert np.array_equal(a.values, b.values)

    def test_repaired_count_matches_rate(self, week_series):
        spec = PerturbationSpec(0.1, seed=1)
        out = inject_missing(week_series, spec)
        assert out.repaired == round(0.1 * len(week_series))

    @given(
        n=st.integers(min_value=3, max_value=400),
        rate=st.floats(min_value=0.0, max_value=0.5),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    @settings(max_examples=40, deadline=None)
    def test_preserves_length_and_endpoints(self, n, rate, seed):
        rng = np.random.default_rng(seed % 1000)
        series = make_series(rng.uniform(1, 100, size=n))
        out = inject_missing(series, PerturbationSpec(rate, seed=seed))
        assert len(out) == n
        assert out.values[0] == series.values[0]
        assert out.values[-1] == series.values[-1]
        assert np.all(np.isfinite(out.values))
        assert np.all(np.diff(out.timestamps) == HOUR)


class TestExtremeMask:
    def test_constant_reference_labels_nothing(self):
        ref = make_series(np.full(30, 42.0))
        labels = extreme_mask(ref, ref)
        assert set(labels) == {"normal"}

    def test_hand_checked_quantile(self):
        # 95th percentile of 1..100 (linear interpolation) is 95.05.
        ref = make_series(np.arange(1.0, 101.0))
        probe = make_series([99.5, 95.0, 50.0, 5.9, 5.0])
        labels = extreme_mask(probe, ref)
        assert list(labels) == ["high", "normal", "normal", "low", "low"]

    def test_high_fraction_bounded_on_reference(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            ref = make_series(rng.uniform(0, 1000, size=rng.integers(20, 500)))
            labels = extreme_mask(ref, ref)
            frac_high = np.mean(labels == "high")
            assert frac_high <= 0.05 + 1.0 / len(ref)

    def test_short_reference_rejected(self):
        ref = make_series(np.arange(1.0, 11.0))
        with pytest.raises(SeriesError):
            extreme_mask(ref, ref)


class TestPeriods:
    def test_default_periods_well_formed(self):
        periods = default_periods()
        assert set(periods) == {"summer", "winter", "covid", "uri", "holiday", "recent"}
        for p in periods.values():
            assert p.start < p.end

    def test_format_parse_round_trip(self):
        ts = parse_utc("2021-02-10T05:00:00Z")
        assert parse_utc(format_utc(ts)) == ts
