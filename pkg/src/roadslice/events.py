"""Road event descriptions and their ground-truth records."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping


class Severity(enum.Enum):
    NONE = "None"
    LIGHT = "Light"
    MODERATE = "Moderate"
    SEVERE = "Severe"

    def __str__(self):
        return self.value


class Direction(enum.Enum):
    EAST_TO_WEST = "EastToWest"
    WEST_TO_EAST = "WestToEast"
    UNKNOWN = "Unknown"

    def __str__(self):
        return self.value


# Peak multiplicative deviation at the source station, per metric.  Congestion
# pushes user counts, DL volume and PRB utilization up and drags the average
# MCS down (worse channel under load).
DEFAULT_INTENSITY: dict[Severity, dict[str, float]] = {
    Severity.LIGHT: {
        "connected_users": 0.7,
        "dl_volume": 0.6,
        "prb_util": 0.5,
        "dl_mcs": -0.12,
    },
    Severity.MODERATE: {
        "connected_users": 1.4,
        "dl_volume": 1.2,
        "prb_util": 0.9,
        "dl_mcs": -0.22,
    },
    Severity.SEVERE: {
        "connected_users": 2.6,
        "dl_volume": 2.2,
        "prb_util": 1.5,
        "dl_mcs": -0.32,
    },
}


@dataclass(frozen=True)
class EventSpec:
    """A road event to inject into a trace set.

    ``intensity`` maps metric name -> peak relative deviation at the source;
    ``None`` selects the built-in profile for the severity class.
    """

    source_station: int
    start: int
    duration_intervals: int
    severity: Severity
    direction: Direction
    propagation_radius_km: float = 15.0
    intensity: Mapping[str, float] | None = None

    def __post_init__(self):
        if self.duration_intervals <= 0:
            raise ValueError("duration_intervals must be > 0")
        if self.propagation_radius_km <= 0:
            raise ValueError("propagation_radius_km must be > 0")

    @property
    def end(self) -> int:
        """First interval after the event (exclusive)."""
        return self.start + self.duration_intervals

    def intensity_profile(self) -> dict[str, float]:
        if self.intensity is not None:
            return dict(self.intensity)
        return dict(DEFAULT_INTENSITY[self.severity])


@dataclass(frozen=True)
class EventRecord:
    """Ground truth for an injected (or externally catalogued) event."""

    source_station: int
    start: int
    duration_intervals: int
    severity: Severity
    direction: Direction
    propagation_radius_km: float = 15.0
    intensity: Mapping[str, float] = field(default_factory=dict)

    @property
    def end(self) -> int:
        return self.start + self.duration_intervals

    def active_at(self, t: int) -> bool:
        return self.start <= t < self.end

    @staticmethod
    def from_spec(spec: EventSpec) -> "EventRecord":
        return EventRecord(
            source_station=spec.source_station,
            start=spec.start,
            duration_intervals=spec.duration_intervals,
            severity=spec.severity,
            direction=spec.direction,
            propagation_radius_km=spec.propagation_radius_km,
            intensity=spec.intensity_profile(),
        )
