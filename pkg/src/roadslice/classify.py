"""Turn per-station probabilities into classified events.

Severity follows the affected-count-over-local-density metric: the number of
flagged stations is divided by the number of stations deployed within a
fixed radius of the source, so an event near a dense urban stretch is not
over-rated just because more stations see it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .events import Direction, Severity
from .topology import NetworkTopology

DEFAULT_THRESHOLD = 0.5
DEFAULT_RADIUS_KM = 10.0
DEFAULT_DEBOUNCE = 2

# severity -> (emergency slice duration in minutes, required downlink Mbps)
ENS_REQUIREMENTS: dict[Severity, tuple[float, float]] = {
    Severity.LIGHT: (20.0, 10.0),
    Severity.MODERATE: (40.0, 15.0),
    Severity.SEVERE: (60.0, 25.0),
}


@dataclass(frozen=True)
class Classification:
    mu: float
    severity: Severity
    theta_minutes: float
    theta_intervals: int
    rate_mbps: float


@dataclass(frozen=True)
class DetectedEvent:
    affected: tuple[int, ...]
    source: int
    mu: float
    severity: Severity
    direction: Direction
    theta_intervals: int
    ens_throughput_mbps: float
    first_window: int
    last_window: int

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["severity"] = self.severity.value
        d["direction"] = self.direction.value
        d["affected"] = list(self.affected)
        return d


def affected_set(probabilities: np.ndarray, threshold: float = DEFAULT_THRESHOLD
                 ) -> set[int]:
    """Stations whose probability strictly exceeds the threshold."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must be in (0, 1)")
    return set(int(i) for i in np.flatnonzero(np.asarray(probabilities) > threshold))


def local_density(topology: NetworkTopology, source: int,
                  radius_km: float = DEFAULT_RADIUS_KM) -> int:
    """Stations within ``radius_km`` of the source along the highway axis."""
    if radius_km <= 0:
        raise ValueError("radius must be > 0")
    if not 0 <= source < topology.n_stations:
        raise ValueError(f"source station {source} outside topology")
    pos = topology.positions_km()
    return int(np.count_nonzero(np.abs(pos - pos[source]) <= radius_km))


def classify(affected: Sequence[int] | set[int], psi: int,
             interval_minutes: float = 15.0,
             moderate_upper: float = 2.0) -> Classification:
    """Severity, emergency duration and throughput from the affected set.

    The boundary value mu == ``moderate_upper`` counts as Moderate (closed
    upper interval); strictly above is Severe.
    """
    if psi < 1:
        raise ValueError("psi must be >= 1")
    mu = len(affected) / psi
    if mu == 0:
        return Classification(0.0, Severity.NONE, 0.0, 0, 0.0)
    if mu <= 1.0:
        severity = Severity.LIGHT
    elif mu <= moderate_upper:
        severity = Severity.MODERATE
    else:
        severity = Severity.SEVERE
    theta_minutes, rate = ENS_REQUIREMENTS[severity]
    theta_intervals = int(np.ceil(theta_minutes / interval_minutes))
    return Classification(mu, severity, theta_minutes, theta_intervals, rate)


def infer_direction(affected: Sequence[int] | set[int], source: int,
                    topology: NetworkTopology) -> Direction:
    """Pick the traffic direction from which side has more flagged stations.

    The vehicle queue grows upstream of the blockage, so a surplus of
    affected stations east of the source means east-to-west traffic.
    """
    if not affected:
        raise ValueError("affected set must be nonempty")
    pos = topology.positions_km()
    src_pos = pos[source]
    east = sum(1 for n in affected if pos[n] > src_pos)
    west = sum(1 for n in affected if pos[n] < src_pos)
    if east > west:
        return Direction.EAST_TO_WEST
    if west > east:
        return Direction.WEST_TO_EAST
    return Direction.UNKNOWN


def detect_events(prob_matrix: np.ndarray, window_ends: np.ndarray,
                  topology: NetworkTopology,
                  threshold: float = DEFAULT_THRESHOLD,
                  debounce: int = DEFAULT_DEBOUNCE,
                  radius_km: float = DEFAULT_RADIUS_KM,
                  interval_minutes: float = 15.0) -> list[DetectedEvent]:
    """Group flagged windows into events.

    A run of consecutive windows with a nonempty affected set becomes an
    event once it lasts at least ``debounce`` windows (single-window flickers
    are dropped).  The source is the station with the highest summed
    probability over the run.
    """
    window_ends = np.asarray(window_ends, dtype=int)
    prob_matrix = np.asarray(prob_matrix)
    flagged = prob_matrix > threshold
    nonempty = flagged.any(axis=1)

    # maximal runs of consecutive (in window time) nonempty windows
    runs: list[tuple[int, int]] = []
    start = None
    for i in range(len(flagged)):
        contiguous = i > 0 and window_ends[i] == window_ends[i - 1] + 1
        if nonempty[i] and start is not None and contiguous:
            continue
        if start is not None:
            runs.append((start, i))
            start = None
        if nonempty[i]:
            start = i
    if start is not None:
        runs.append((start, len(flagged)))

    events: list[DetectedEvent] = []
    for lo, hi in runs:
        if hi - lo < debounce:
            continue
        probs = prob_matrix[lo:hi]
        affected_union = sorted(int(n) for n in np.flatnonzero(flagged[lo:hi].any(axis=0)))
        source = int(np.argmax(probs.sum(axis=0)))
        psi = local_density(topology, source, radius_km)
        cls = classify(affected_union, psi, interval_minutes)
        direction = infer_direction(affected_union, source, topology)
        events.append(DetectedEvent(
            affected=tuple(affected_union),
            source=source,
            mu=cls.mu,
            severity=cls.severity,
            direction=direction,
            theta_intervals=cls.theta_intervals,
            ens_throughput_mbps=cls.rate_mbps,
            first_window=int(window_ends[lo]),
            last_window=int(window_ends[hi - 1]),
        ))
    return events


def export_events_json(events: Sequence[DetectedEvent], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps([ev.to_json_dict() for ev in events], indent=2)
    )
