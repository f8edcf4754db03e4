import numpy as np
import pytest

from roadslice.events import Direction, EventSpec, Severity
from roadslice.generator import (
    SignatureConfig,
    event_decay,
    generate_baseline,
    inject_event,
    sample_events,
    weekend_urban_profile,
    workday_profile,
)
from roadslice.topology import build_topology


def local_maxima_count(series: np.ndarray, prominence: float) -> int:
    """Peaks that rise at least ``prominence`` above the valleys around them."""
    peaks = 0
    last_valley = series[0]
    climbing = True
    best = series[0]
    for x in series[1:]:
        if climbing:
            if x > best:
                best = x
            elif best - x >= prominence and best - last_valley >= prominence:
                peaks += 1
                climbing = False
                last_valley = x
            elif x < last_valley:
                last_valley = x
        else:
            if x < last_valley:
                last_valley = x
            elif x - last_valley >= prominence:
                climbing = True
                best = x
    return peaks


class TestBaseline:
    def test_sample_count(self, tiny_topology):
        traces = generate_baseline(tiny_topology, 7, seed=42)
        assert traces.n_samples == 7 * 96
        assert traces.samples_per_day == 96

    def test_seeded_determinism(self, tiny_topology):
        a = generate_baseline(tiny_topology, 3, seed=42)
        b = generate_baseline(tiny_topology, 3, seed=42)
        assert np.array_equal(a.values, b.values)
        c = generate_baseline(tiny_topology, 3, seed=43)
        assert not np.array_equal(a.values, c.values)

    def test_ul_dl_ratio(self, tiny_topology):
        traces = generate_baseline(tiny_topology, 7, seed=1)
        ratio = traces.values[traces.metric_index("ul_volume")].mean() / \
            traces.values[traces.metric_index("dl_volume")].mean()
        assert 0.05 <= ratio <= 0.15

    def test_workday_is_trimodal(self, tiny_topology):
        traces = generate_baseline(tiny_topology, 14, seed=5)
        spd = traces.samples_per_day
        users = traces.values[traces.metric_index("connected_users")]
        # Mondays-Fridays of two weeks, one arbitrary station
        days = [d for d in range(14) if (traces.start_timestamp.weekday() + d) % 7 < 5]
        prof = np.median(
            np.stack([users[4, d * spd : (d + 1) * spd] for d in days]), axis=0
        )
        smooth = np.convolve(prof, np.ones(5) / 5, mode="same")
        rel = smooth / smooth.max()
        assert local_maxima_count(rel, prominence=0.05) == 3

    def test_weekend_signatures(self):
        topo = build_topology(24, 2.0, 100)
        config = SignatureConfig()
        traces = generate_baseline(topo, 28, seed=5, config=config)
        spd = traces.samples_per_day
        users = traces.values[traces.metric_index("connected_users")]
        urban = config.urban_mask(topo)
        assert urban.any() and not urban.all()

        def day_profile(station, days):
            return np.median(
                np.stack([users[station, d * spd : (d + 1) * spd] for d in days]),
                axis=0,
            )

        wd = [d for d in range(28) if (traces.start_timestamp.weekday() + d) % 7 < 5]
        we = [d for d in range(28) if (traces.start_timestamp.weekday() + d) % 7 >= 5]

        def shape_gap(station):
            a, b = day_profile(station, wd), day_profile(station, we)
            return np.abs(a / a.max() - b / b.max()).mean()

        urban_station = int(np.flatnonzero(urban)[0])
        rural_station = int(np.flatnonzero(~urban)[0])
        assert shape_gap(rural_station) < 0.05  # same commuting shape
        assert shape_gap(urban_station) > 0.10  # flattened weekend

    def test_empty_and_bad_args(self, tiny_topology):
        with pytest.raises(ValueError):
            generate_baseline(tiny_topology, 0, seed=1)


class TestProfiles:
    def test_workday_profile_three_peaks(self):
        hours = np.linspace(0, 24, 24 * 12, endpoint=False)
        prof = workday_profile(hours, SignatureConfig())
        rel = prof / prof.max()
        assert local_maxima_count(rel, prominence=0.05) == 3

    def test_weekend_urban_single_peak(self):
        hours = np.linspace(0, 24, 24 * 12, endpoint=False)
        prof = weekend_urban_profile(hours, SignatureConfig())
        rel = prof / prof.max()
        assert local_maxima_count(rel, prominence=0.05) == 1


class TestInjection:
    def test_severe_event_lifts_connected_users(self, tiny_topology):
        base = generate_baseline(tiny_topology, 2, seed=42)
        spec = EventSpec(source_station=4, start=36, duration_intervals=4,
                         severity=Severity.SEVERE, direction=Direction.EAST_TO_WEST)
        bumped, record = inject_event(base, tiny_topology, spec)
        m = base.metric_index("connected_users")
        sl = slice(36, 40)
        assert bumped.values[m, 4, sl].mean() > 1.5 * base.values[m, 4, sl].mean()
        assert record.source_station == 4 and record.end == 40

    def test_zero_intensity_is_identity(self, tiny_topology, tiny_traces):
        spec = EventSpec(source_station=2, start=10, duration_intervals=4,
                         severity=Severity.LIGHT, direction=Direction.EAST_TO_WEST,
                         intensity={})
        out, _ = inject_event(tiny_traces, tiny_topology, spec)
        assert np.array_equal(out.values, tiny_traces.values)

    def test_decay_is_monotone_in_distance(self):
        config = SignatureConfig()
        d = np.array([2.0, 12.0])
        same_side = np.array([True, True])
        factors = event_decay(d, same_side, config, radius_km=15.0)
        assert factors[1] < factors[0]
        # non-increasing along a whole side
        dists = np.linspace(0, 14, 30)
        f = event_decay(dists, np.ones(30, bool), config, radius_km=15.0)
        assert np.all(np.diff(f) <= 1e-12)

    def test_radius_cuts_off(self):
        config = SignatureConfig()
        f = event_decay(np.array([16.0]), np.array([True]), config, radius_km=15.0)
        assert f[0] == 0.0

    def test_directional_asymmetry(self, tiny_topology):
        base = generate_baseline(tiny_topology, 2, seed=7)
        m = base.metric_index("connected_users")
        for direction, seed in [(Direction.EAST_TO_WEST, 0), (Direction.WEST_TO_EAST, 1)]:
            spec = EventSpec(source_station=4, start=50, duration_intervals=6,
                             severity=Severity.MODERATE, direction=direction)
            out, _ = inject_event(base, tiny_topology, spec)
            dev = out.values[m, :, 50:56] - base.values[m, :, 50:56]
            east = dev[5:].sum()
            west = dev[:4].sum()
            if direction == Direction.EAST_TO_WEST:
                assert east >= west
            else:
                assert west >= east

    def test_out_of_range_event(self, tiny_topology, tiny_traces):
        late = EventSpec(source_station=1, start=tiny_traces.n_samples - 2,
                         duration_intervals=5, severity=Severity.LIGHT,
                         direction=Direction.EAST_TO_WEST)
        with pytest.raises(ValueError):
            inject_event(tiny_traces, tiny_topology, late)
        bad_station = EventSpec(source_station=99, start=0, duration_intervals=2,
                                severity=Severity.LIGHT,
                                direction=Direction.EAST_TO_WEST)
        with pytest.raises(ValueError):
            inject_event(tiny_traces, tiny_topology, bad_station)


def test_sample_events_fit_span(tiny_topology):
    specs = sample_events(tiny_topology, n_samples=4 * 96, n_events=6, seed=2)
    assert len(specs) == 6
    for spec in specs:
        assert 0 <= spec.start and spec.end <= 4 * 96
        assert 0 <= spec.source_station < tiny_topology.n_stations
    starts = [s.start for s in specs]
    assert starts == sorted(starts)
