"""Seeded synthetic highway traces with diurnal structure and road events.

The generator reproduces the qualitative structure of highway RAN
monitoring data:

* workdays show three commuting peaks (morning / noon / evening); weekends
  keep that shape only for inter-urban stations, while stations near cities
  flatten to a single midday bump;
* uplink volume runs at roughly 10% of downlink volume;
* a road event inflates connected users, DL volume and PRB utilization at
  its source station and, with exponentially decaying magnitude, at the
  neighbours - more strongly on the upstream side of the traffic direction
  (the vehicle queue builds up behind the event).

Everything is a pure function of (topology, config, seed).
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Sequence

import numpy as np

from .events import Direction, EventRecord, EventSpec, Severity
from .topology import NetworkTopology
from .traces import DEFAULT_INTERVAL_MINUTES, DEFAULT_START, TraceSet

DEFAULT_METRICS = ("connected_users", "dl_volume", "ul_volume", "prb_util", "dl_mcs")

# Metrics that react to road congestion.  ul_volume is derived from dl_volume,
# so it inherits the deviation implicitly.
EVENT_SENSITIVE_METRICS = ("connected_users", "dl_volume", "prb_util", "dl_mcs")


@dataclass(frozen=True)
class SignatureConfig:
    """Tunable constants of the synthetic signal."""

    metrics: tuple[str, ...] = DEFAULT_METRICS
    # workday commuting peaks (hour of day, amplitude, width in hours)
    workday_peaks: tuple[tuple[float, float, float], ...] = (
        (8.0, 0.95, 1.3),
        (12.5, 0.55, 1.0),
        (18.0, 1.0, 1.6),
    )
    workday_base: float = 0.18
    weekend_urban_peak: tuple[float, float, float] = (14.0, 0.6, 2.8)
    weekend_urban_base: float = 0.15
    # city centres (fractions of the highway span); stations within
    # city_radius_km of one are "urban"
    city_fractions: tuple[float, ...] = (0.15, 0.5, 0.85)
    city_radius_km: float = 5.0
    urban_load_boost: float = 1.6
    # per-metric output scales
    users_scale: float = 220.0
    dl_volume_scale: float = 2.4e9
    ul_dl_ratio: float = 0.10
    prb_util_scale: float = 0.55
    mcs_base: float = 22.0
    mcs_slope: float = 6.0
    noise_sigma: float = 0.05
    station_spread_sigma: float = 0.08
    # day-to-day variability: a common busy-day factor plus per-station-day
    # jitter (weather, social behaviour); makes raw levels an unreliable
    # event indicator, as in operational data
    day_scale_sigma: float = 0.10
    station_day_sigma: float = 0.08
    # event propagation (exponential decay lengths per side of the source)
    decay_upstream_km: float = 6.0
    decay_downstream_km: float = 2.0
    ramp_fraction: float = 0.25

    def urban_mask(self, topology: NetworkTopology) -> np.ndarray:
        pos = topology.positions_km()
        lo, hi = pos[0], pos[-1]
        centres = lo + np.asarray(self.city_fractions) * (hi - lo)
        dist = np.abs(pos[:, None] - centres[None, :]).min(axis=1)
        return dist <= self.city_radius_km


def _gaussian(h: np.ndarray, mu: float, sigma: float) -> np.ndarray:
    return np.exp(-0.5 * ((h - mu) / sigma) ** 2)


def workday_profile(hours: np.ndarray, config: SignatureConfig) -> np.ndarray:
    out = np.full_like(hours, config.workday_base, dtype=float)
    for mu, amp, sigma in config.workday_peaks:
        out += amp * _gaussian(hours, mu, sigma)
    return out


def weekend_urban_profile(hours: np.ndarray, config: SignatureConfig) -> np.ndarray:
    mu, amp, sigma = config.weekend_urban_peak
    return config.weekend_urban_base + amp * _gaussian(hours, mu, sigma)


def generate_baseline(
    topology: NetworkTopology,
    n_days: int,
    seed: int,
    config: SignatureConfig | None = None,
    interval_minutes: float = DEFAULT_INTERVAL_MINUTES,
    start_timestamp: datetime = DEFAULT_START,
) -> TraceSet:
    """Event-free traces for ``n_days`` starting at ``start_timestamp``."""
    if topology.n_stations == 0:
        raise ValueError("empty topology")
    if n_days < 1:
        raise ValueError("n_days must be >= 1")
    config = config or SignatureConfig()
    rng = np.random.default_rng(seed)

    spd = int(round(24 * 60 / interval_minutes))
    n_t = n_days * spd
    n_st = topology.n_stations
    hours = (np.arange(n_t) % spd) * (interval_minutes / 60.0)
    day_index = np.arange(n_t) // spd
    weekday = (start_timestamp.weekday() + day_index) % 7
    is_weekend = weekday >= 5

    urban = config.urban_mask(topology)
    # persistent per-station texture so stations are distinguishable
    station_factor = np.exp(rng.normal(0.0, config.station_spread_sigma, size=n_st))
    base_level = np.where(urban, config.urban_load_boost, 1.0) * station_factor

    wk = workday_profile(hours, config)
    we_urban = weekend_urban_profile(hours, config)
    day_factor = np.exp(rng.normal(0.0, config.day_scale_sigma, size=n_days))
    station_day = np.exp(
        rng.normal(0.0, config.station_day_sigma, size=(n_st, n_days))
    )
    # load[n, t]: urban stations switch shape on weekends, inter-urban do not
    load = np.empty((n_st, n_t))
    for n in range(n_st):
        shape = np.where(is_weekend & urban[n], we_urban, wk)
        load[n] = base_level[n] * shape * day_factor[day_index] * station_day[n, day_index]

    def noisy(scale=1.0):
        return 1.0 + rng.normal(0.0, config.noise_sigma * scale, size=(n_st, n_t))

    values = np.empty((len(config.metrics), n_st, n_t))
    series: dict[str, np.ndarray] = {}
    series["connected_users"] = np.maximum(config.users_scale * load * noisy(), 0.0)
    dl = np.maximum(config.dl_volume_scale * load * noisy(), 0.0)
    series["dl_volume"] = dl
    series["ul_volume"] = np.maximum(config.ul_dl_ratio * dl * noisy(0.6), 0.0)
    series["prb_util"] = np.clip(config.prb_util_scale * load * noisy(), 0.005, 0.999)
    series["dl_mcs"] = np.clip(
        config.mcs_base - config.mcs_slope * load * noisy(), 1.0, 28.0
    )
    for i, metric in enumerate(config.metrics):
        if metric not in series:
            raise ValueError(f"no generator defined for metric {metric!r}")
        values[i] = series[metric]

    return TraceSet(
        metrics=tuple(config.metrics),
        values=values,
        interval_minutes=interval_minutes,
        start_timestamp=start_timestamp,
    )


def _event_ramp(duration: int, ramp_fraction: float) -> np.ndarray:
    """Trapezoid over the event: quick onset, plateau, gradual release."""
    t = np.arange(duration, dtype=float)
    edge = max(1.0, ramp_fraction * duration)
    return np.minimum(1.0, np.minimum((t + 1) / edge, (duration - t) / edge))


def event_decay(
    distance_km: np.ndarray,
    upstream: np.ndarray,
    config: SignatureConfig,
    radius_km: float,
) -> np.ndarray:
    """Spatial attenuation of the deviation, per station.

    ``upstream`` marks stations on the side where the vehicle queue grows;
    that side decays more slowly (longer reach).
    """
    decay_len = np.where(upstream, config.decay_upstream_km, config.decay_downstream_km)
    factor = np.exp(-distance_km / decay_len)
    factor[distance_km > radius_km] = 0.0
    return factor


def inject_event(
    traces: TraceSet,
    topology: NetworkTopology,
    event: EventSpec,
    config: SignatureConfig | None = None,
) -> tuple[TraceSet, EventRecord]:
    """Overlay one road event onto ``traces``; returns the ground truth."""
    config = config or SignatureConfig()
    if not 0 <= event.source_station < topology.n_stations:
        raise ValueError(f"source station {event.source_station} outside topology")
    if event.start < 0 or event.end > traces.n_samples:
        raise ValueError("event window outside trace span")

    pos = topology.positions_km()
    src_pos = pos[event.source_station]
    dist = np.abs(pos - src_pos)
    east = pos > src_pos
    west = pos < src_pos
    if event.direction == Direction.EAST_TO_WEST:
        upstream = east  # queue builds east of the blockage
    elif event.direction == Direction.WEST_TO_EAST:
        upstream = west
    else:
        upstream = np.zeros_like(east)

    spatial = event_decay(dist, upstream, config, event.propagation_radius_km)
    ramp = _event_ramp(event.duration_intervals, config.ramp_fraction)
    profile = event.intensity_profile()

    values = np.array(traces.values)
    t_slice = slice(event.start, event.end)
    for metric, peak in profile.items():
        if metric not in traces.metrics:
            continue
        m = traces.metric_index(metric)
        factor = 1.0 + peak * spatial[:, None] * ramp[None, :]
        block = values[m, :, t_slice] * np.maximum(factor, 0.0)
        if metric == "prb_util":
            block = np.clip(block, 0.0, 0.999)
        values[m, :, t_slice] = block

    record = EventRecord(
        source_station=event.source_station,
        start=event.start,
        duration_intervals=event.duration_intervals,
        severity=event.severity,
        direction=event.direction,
        propagation_radius_km=event.propagation_radius_km,
        intensity=profile,
    )
    return traces.with_values(values), record


def inject_events(
    traces: TraceSet,
    topology: NetworkTopology,
    specs: Sequence[EventSpec],
    config: SignatureConfig | None = None,
) -> tuple[TraceSet, list[EventRecord]]:
    records = []
    for spec in specs:
        traces, rec = inject_event(traces, topology, spec, config)
        records.append(rec)
    return traces, records


def sample_benign_anomalies(
    topology: NetworkTopology,
    n_samples: int,
    n_anomalies: int,
    seed: int,
    min_duration: int = 2,
    max_duration: int = 8,
) -> list[EventSpec]:
    """Confounders: single-station, single-metric bumps that are NOT road
    events (think hardware faults or one-off traffic peaks).

    They deviate one metric at one station with no propagation to
    neighbours, so a detector keying on "anything unusual" flags them while
    the road-event signature (multi-metric, spreading, direction-skewed)
    is absent.  Returned specs are meant to be injected but kept out of the
    ground-truth event list.
    """
    rng = np.random.default_rng(seed)
    specs: list[EventSpec] = []
    for _ in range(n_anomalies):
        duration = int(rng.integers(min_duration, max_duration + 1))
        start = int(rng.integers(0, n_samples - duration))
        # correlated multi-metric bump, like a local crowd or cell fault;
        # what it lacks is the spreading, direction-skewed footprint
        amp = float(rng.uniform(0.3, 1.3))
        intensity = {
            "connected_users": amp,
            "dl_volume": amp * float(rng.uniform(0.6, 1.1)),
            "prb_util": amp * float(rng.uniform(0.4, 0.9)),
        }
        specs.append(
            EventSpec(
                source_station=int(rng.integers(0, topology.n_stations)),
                start=start,
                duration_intervals=duration,
                severity=Severity.LIGHT,  # irrelevant; not ground truth
                direction=Direction.UNKNOWN,
                propagation_radius_km=0.1,  # no reach beyond the source
                intensity=intensity,
            )
        )
    return specs


def sample_events(
    topology: NetworkTopology,
    n_samples: int,
    n_events: int,
    seed: int,
    min_duration: int = 4,
    max_duration: int = 10,
    min_gap: int = 20,
    radius_km: float = 15.0,
) -> list[EventSpec]:
    """Draw ``n_events`` non-overlapping events spread across the trace span."""
    rng = np.random.default_rng(seed)
    spd_margin = max_duration + min_gap
    if n_events * spd_margin > n_samples:
        raise ValueError("trace too short for the requested number of events")
    # stratified starts keep events spread over the whole span (and thus over
    # train/validation/test splits alike)
    bounds = np.linspace(0, n_samples - max_duration - 1, n_events + 1).astype(int)
    specs: list[EventSpec] = []
    severities = [Severity.LIGHT, Severity.MODERATE, Severity.SEVERE]
    directions = [Direction.EAST_TO_WEST, Direction.WEST_TO_EAST]
    for k in range(n_events):
        lo, hi = bounds[k], bounds[k + 1]
        start = int(rng.integers(lo, max(lo + 1, hi - spd_margin)))
        duration = int(rng.integers(min_duration, max_duration + 1))
        specs.append(
            EventSpec(
                source_station=int(rng.integers(0, topology.n_stations)),
                start=start,
                duration_intervals=duration,
                severity=severities[int(rng.integers(0, 3))],
                direction=directions[int(rng.integers(0, 2))],
                propagation_radius_km=radius_km,
            )
        )
    return specs
