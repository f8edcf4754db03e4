import numpy as np
import pytest

from roadslice.errors import (
    DegenerateMetricError,
    InsufficientHistoryError,
    TraceParseError,
)
from roadslice.events import Direction, EventRecord, Severity
from roadslice.traces import (
    TraceSet,
    compute_norm_stats,
    export_csv,
    export_events_csv,
    ingest_csv,
    ingest_events_csv,
    lookback_length,
    normalize,
    window,
)


def make_traceset(values):
    values = np.asarray(values, dtype=float)
    metrics = tuple(f"m{i}" for i in range(values.shape[0]))
    return TraceSet(metrics=metrics, values=values)


class TestWindowing:
    def test_four_hours_at_fifteen_minutes_is_sixteen(self):
        assert lookback_length(240, 15) == 16

    def test_first_valid_window_starts_at_zero(self, tiny_traces):
        snap = window(tiny_traces, "dl_volume", end=15, length=16)
        m = tiny_traces.metric_index("dl_volume")
        assert np.array_equal(snap.matrix, tiny_traces.values[m, :, 0:16])

    def test_sliding_windows_share_columns(self, tiny_traces):
        a = window(tiny_traces, "dl_volume", end=30, length=16)
        b = window(tiny_traces, "dl_volume", end=31, length=16)
        assert np.array_equal(a.matrix[:, 1:], b.matrix[:, :-1])

    def test_insufficient_history(self, tiny_traces):
        with pytest.raises(InsufficientHistoryError):
            window(tiny_traces, "dl_volume", end=14, length=16)

    def test_row_per_station(self, tiny_traces):
        snap = window(tiny_traces, "prb_util", end=20, length=8)
        assert snap.matrix.shape == (tiny_traces.n_stations, 8)


class TestNormalization:
    def test_simple_division(self):
        ts = make_traceset([[[2.0, 4.0, 8.0]]])
        stats = compute_norm_stats(ts, 1.0)
        out = normalize(ts, stats)
        assert np.allclose(out.values[0, 0], [0.25, 0.5, 1.0])

    def test_test_values_may_exceed_one(self):
        ts = make_traceset([[[2.0, 4.0, 8.0]]])
        stats = compute_norm_stats(ts, 2 / 3)
        out = normalize(ts, stats)
        assert out.values[0, 0, 2] == pytest.approx(2.0)

    def test_stats_use_training_prefix_only(self):
        vals = np.ones((1, 1, 10))
        vals[0, 0, 7] = 100.0  # outside a 60% training split
        stats = compute_norm_stats(make_traceset(vals), 0.6)
        assert stats.maxima[0] == 1.0
        assert stats.training_samples == 6

    def test_training_max_normalizes_to_exactly_one(self, tiny_traces):
        stats = compute_norm_stats(tiny_traces, 0.6)
        out = normalize(tiny_traces, stats)
        n_train = stats.training_samples
        for m in range(out.n_metrics):
            assert out.values[m, :, :n_train].max() == pytest.approx(1.0)

    def test_degenerate_metric(self):
        with pytest.raises(DegenerateMetricError):
            compute_norm_stats(make_traceset(np.zeros((1, 2, 5))), 1.0)

    def test_bad_fraction(self, tiny_traces):
        with pytest.raises(ValueError):
            compute_norm_stats(tiny_traces, 0.0)


class TestTraceCsv:
    def test_round_trip(self, tiny_traces, tmp_path):
        path = tmp_path / "traces.csv"
        export_csv(tiny_traces, path)
        back = ingest_csv(path)
        assert back.metrics == tiny_traces.metrics
        assert tiny_traces.allclose(back)

    def test_missing_cell_is_located(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("metric,station_id,t0,t1\nm0,0,1.0,2.0\nm0,1,3.0\n")
        with pytest.raises(TraceParseError) as err:
            ingest_csv(path)
        assert err.value.row == 2

    def test_non_numeric_cell_is_located(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("metric,station_id,t0,t1\nm0,0,1.0,oops\n")
        with pytest.raises(TraceParseError) as err:
            ingest_csv(path)
        assert err.value.row == 1 and err.value.column == 3

    def test_station_coverage_enforced(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("metric,station_id,t0\nm0,0,1.0\nm0,2,1.0\n")
        with pytest.raises(TraceParseError):
            ingest_csv(path)


class TestEventsCsv:
    def test_round_trip_in_time_order(self, tmp_path):
        events = [
            EventRecord(5, 120, 4, Severity.SEVERE, Direction.EAST_TO_WEST),
            EventRecord(2, 40, 6, Severity.LIGHT, Direction.WEST_TO_EAST),
            EventRecord(7, 300, 3, Severity.MODERATE, Direction.EAST_TO_WEST),
        ]
        path = tmp_path / "events.csv"
        export_events_csv(events, path)
        back = ingest_events_csv(path)
        assert len(back) == 3
        assert [ev.start for ev in back] == [40, 120, 300]
        assert back[0].severity == Severity.LIGHT

    def test_unknown_severity(self, tmp_path):
        path = tmp_path / "events.csv"
        path.write_text(
            "source_station,start,duration,severity,direction\n0,1,2,Huge,EastToWest\n"
        )
        with pytest.raises(TraceParseError):
            ingest_events_csv(path)


def test_traceset_rejects_bad_values():
    with pytest.raises(ValueError):
        make_traceset(np.full((1, 1, 3), -1.0))
    with pytest.raises(ValueError):
        make_traceset(np.array([[[np.nan, 1.0, 2.0]]]))


def test_traceset_is_read_only(tiny_traces):
    with pytest.raises(ValueError):
        tiny_traces.values[0, 0, 0] = 1.0
