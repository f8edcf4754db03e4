"""Monitoring trace containers, normalization and CSV round-trip.

A :class:`TraceSet` holds one time series per (metric, station) at a fixed
sampling interval (15 minutes by default).  Model input is built from it by
slicing lookback windows: the matrix handed to the detectors has one row per
station (in highway order) and one column per sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateMetricError,
    InsufficientHistoryError,
    TraceParseError,
)
from .events import Direction, EventRecord, Severity

DEFAULT_INTERVAL_MINUTES = 15.0
DEFAULT_START = datetime(2020, 2, 3)  # a Monday, so day types are deterministic

# Serialized with 6 significant digits; round-trip is exact to ~1e-5 relative.
CSV_FORMAT = "%.6g"
CSV_ROUNDTRIP_RTOL = 1e-5


@dataclass(frozen=True)
class TraceSet:
    """Rectangular stack of monitoring series: ``values[m, n, t]``."""

    metrics: tuple[str, ...]
    values: np.ndarray
    interval_minutes: float = DEFAULT_INTERVAL_MINUTES
    start_timestamp: datetime = DEFAULT_START

    def __post_init__(self):
        v = self.values
        if v.ndim != 3:
            raise ValueError("values must be a (metric, station, time) array")
        if v.shape[0] != len(self.metrics):
            raise ValueError("first axis must match the metric list")
        if not np.all(np.isfinite(v)):
            raise ValueError("trace values must be finite")
        if np.any(v < 0):
            raise ValueError("trace values must be nonnegative")
        if self.interval_minutes <= 0:
            raise ValueError("interval_minutes must be > 0")
        v.setflags(write=False)

    @property
    def n_metrics(self) -> int:
        return len(self.metrics)

    @property
    def n_stations(self) -> int:
        return self.values.shape[1]

    @property
    def n_samples(self) -> int:
        return self.values.shape[2]

    @property
    def samples_per_day(self) -> int:
        return int(round(24 * 60 / self.interval_minutes))

    def metric_index(self, metric: str) -> int:
        try:
            return self.metrics.index(metric)
        except ValueError:
            raise KeyError(f"unknown metric {metric!r}") from None

    def series(self, metric: str, station: int) -> np.ndarray:
        return self.values[self.metric_index(metric), station]

    def with_values(self, values: np.ndarray) -> "TraceSet":
        return replace(self, values=values)

    def allclose(self, other: "TraceSet", rtol: float = CSV_ROUNDTRIP_RTOL) -> bool:
        return (
            self.metrics == other.metrics
            and self.values.shape == other.values.shape
            and np.allclose(self.values, other.values, rtol=rtol, atol=1e-12)
        )


@dataclass(frozen=True)
class Snapshot:
    """One lookback window of one metric: stations x samples."""

    metric: str
    matrix: np.ndarray  # (N, L)
    window_end: int


@dataclass(frozen=True)
class NormStats:
    """Per-metric maxima over the training split."""

    metrics: tuple[str, ...]
    maxima: np.ndarray
    training_samples: int

    def __post_init__(self):
        if self.maxima.shape != (len(self.metrics),):
            raise ValueError("one maximum per metric required")


def lookback_length(lookback_minutes: float, interval_minutes: float) -> int:
    """Number of samples in a lookback window (4 h at 15 min -> 16)."""
    length = lookback_minutes / interval_minutes
    if abs(length - round(length)) > 1e-9 or length < 1:
        raise ValueError("lookback must be a positive multiple of the sampling interval")
    return int(round(length))


def window(traces: TraceSet, metric: str, end: int, length: int) -> Snapshot:
    """The ``length`` most recent samples of ``metric`` ending at ``end``."""
    if length < 1:
        raise ValueError("window length must be >= 1")
    if end >= traces.n_samples:
        raise ValueError(f"window end {end} beyond trace length {traces.n_samples}")
    if end < length - 1:
        raise InsufficientHistoryError(
            f"window ending at t={end} needs {length} samples, trace starts at t=0"
        )
    m = traces.metric_index(metric)
    mat = np.ascontiguousarray(traces.values[m, :, end - length + 1 : end + 1])
    return Snapshot(metric=metric, matrix=mat, window_end=end)


def compute_norm_stats(traces: TraceSet, training_fraction: float) -> NormStats:
    if not 0 < training_fraction <= 1:
        raise ValueError("training_fraction must be in (0, 1]")
    n_train = max(1, int(math.floor(traces.n_samples * training_fraction)))
    maxima = traces.values[:, :, :n_train].max(axis=(1, 2))
    for m, mx in zip(traces.metrics, maxima):
        if mx <= 0:
            raise DegenerateMetricError(
                f"metric {m!r} is identically zero over the training split"
            )
    return NormStats(metrics=traces.metrics, maxima=maxima, training_samples=n_train)


def normalize(traces: TraceSet, stats: NormStats) -> TraceSet:
    """Divide each metric by its training maximum (test values may exceed 1)."""
    if stats.metrics != traces.metrics:
        raise ValueError("norm stats computed for a different metric set")
    scaled = traces.values / stats.maxima[:, None, None]
    return traces.with_values(scaled)


# ---------------------------------------------------------------------------
# CSV interchange
#
# traces:  header ``metric,station_id,t0,t1,...``, one row per (metric, station)
# events:  header ``source_station,start,duration,severity,direction``
# ---------------------------------------------------------------------------


def export_csv(traces: TraceSet, path: str | Path) -> None:
    path = Path(path)
    n_t = traces.n_samples
    header = "metric,station_id," + ",".join(f"t{t}" for t in range(n_t))
    lines = [header]
    for m, metric in enumerate(traces.metrics):
        for n in range(traces.n_stations):
            row = traces.values[m, n]
            cells = ",".join(CSV_FORMAT % x for x in row)
            lines.append(f"{metric},{n},{cells}")
    path.write_text("\n".join(lines) + "\n")


def ingest_csv(
    path: str | Path,
    interval_minutes: float = DEFAULT_INTERVAL_MINUTES,
    start_timestamp: datetime = DEFAULT_START,
) -> TraceSet:
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise TraceParseError("empty traces file", row=0)
    header = lines[0].split(",")
    if header[:2] != ["metric", "station_id"]:
        raise TraceParseError("header must start with 'metric,station_id'", row=0)
    n_t = len(header) - 2
    if n_t < 1:
        raise TraceParseError("no time columns in header", row=0)

    per_metric: dict[str, dict[int, np.ndarray]] = {}
    metric_order: list[str] = []
    for r, line in enumerate(lines[1:], start=1):
        cells = line.split(",")
        if len(cells) != n_t + 2:
            raise TraceParseError(
                f"expected {n_t + 2} cells, found {len(cells)}", row=r
            )
        metric = cells[0]
        try:
            station = int(cells[1])
        except ValueError:
            raise TraceParseError("station_id is not an integer", row=r, column=1) from None
        vals = np.empty(n_t)
        for c, cell in enumerate(cells[2:], start=2):
            try:
                vals[c - 2] = float(cell)
            except ValueError:
                raise TraceParseError(
                    f"non-numeric cell {cell!r}", row=r, column=c
                ) from None
        if metric not in per_metric:
            per_metric[metric] = {}
            metric_order.append(metric)
        if station in per_metric[metric]:
            raise TraceParseError(f"duplicate row for ({metric}, {station})", row=r)
        per_metric[metric][station] = vals

    stations_per_metric = {m: sorted(rows) for m, rows in per_metric.items()}
    n_stations = len(stations_per_metric[metric_order[0]])
    for m, ids in stations_per_metric.items():
        if ids != list(range(n_stations)):
            raise TraceParseError(
                f"metric {m!r} must cover stations 0..{n_stations - 1} exactly"
            )
    values = np.stack(
        [
            np.stack([per_metric[m][n] for n in range(n_stations)])
            for m in metric_order
        ]
    )
    return TraceSet(
        metrics=tuple(metric_order),
        values=values,
        interval_minutes=interval_minutes,
        start_timestamp=start_timestamp,
    )


def export_events_csv(events: list[EventRecord], path: str | Path) -> None:
    path = Path(path)
    lines = ["source_station,start,duration,severity,direction"]
    for ev in events:
        lines.append(
            f"{ev.source_station},{ev.start},{ev.duration_intervals},"
            f"{ev.severity.value},{ev.direction.value}"
        )
    path.write_text("\n".join(lines) + "\n")


def ingest_events_csv(path: str | Path) -> list[EventRecord]:
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise TraceParseError("empty events file", row=0)
    if lines[0].split(",") != ["source_station", "start", "duration", "severity", "direction"]:
        raise TraceParseError("unexpected events header", row=0)
    out: list[EventRecord] = []
    for r, line in enumerate(lines[1:], start=1):
        cells = line.split(",")
        if len(cells) != 5:
            raise TraceParseError(f"expected 5 cells, found {len(cells)}", row=r)
        try:
            source = int(cells[0])
            start = int(cells[1])
            duration = int(cells[2])
        except ValueError:
            raise TraceParseError("non-integer event field", row=r) from None
        try:
            severity = Severity(cells[3])
        except ValueError:
            raise TraceParseError(f"unknown severity {cells[3]!r}", row=r, column=3) from None
        try:
            direction = Direction(cells[4])
        except ValueError:
            raise TraceParseError(f"unknown direction {cells[4]!r}", row=r, column=4) from None
        out.append(
            EventRecord(
                source_station=source,
                start=start,
                duration_intervals=duration,
                severity=severity,
                direction=direction,
            )
        )
    out.sort(key=lambda ev: (ev.start, ev.source_station))
    return out
