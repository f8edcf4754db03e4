"""Highway network model: an ordered line of base stations.

Stations live on a 1-D axis (kilometres along the highway) and are always
ordered west-to-east; everything downstream (windowing, localization,
severity classification) relies on that ordering.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class BaseStation:
    id: int
    position_km: float
    capacity_prbs: int


@dataclass(frozen=True)
class NetworkTopology:
    stations: tuple[BaseStation, ...]

    def __post_init__(self):
        if len(self.stations) < 1:
            raise ValueError("topology needs at least one station")
        for i, st in enumerate(self.stations):
            if st.id != i:
                raise ValueError(f"station ids must be contiguous 0..N-1, got {st.id} at index {i}")
            if st.capacity_prbs < 1:
                raise ValueError(f"station {i}: capacity_prbs must be >= 1")
        pos = [st.position_km for st in self.stations]
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ValueError("station positions must be strictly increasing")

    @property
    def n_stations(self) -> int:
        return len(self.stations)

    def positions_km(self) -> np.ndarray:
        return np.array([st.position_km for st in self.stations], dtype=float)

    def capacities(self) -> np.ndarray:
        return np.array([st.capacity_prbs for st in self.stations], dtype=int)

    @property
    def span_km(self) -> float:
        return self.stations[-1].position_km - self.stations[0].position_km


def build_topology(
    n_stations: int,
    spacing_km: float,
    capacity_prbs: int,
    density_profile: Sequence[float] | None = None,
) -> NetworkTopology:
    """Lay out ``n_stations`` along the highway.

    With no density profile, station ``i`` sits at ``i * spacing_km``.  A
    density profile (one multiplier per station, > 0) compresses spacing
    where density is high: the gap before station ``i`` becomes
    ``spacing_km / density_profile[i]``.
    """
    if n_stations < 2:
        raise ValueError("n_stations must be >= 2")
    if spacing_km <= 0:
        raise ValueError("spacing_km must be > 0")
    if capacity_prbs < 1:
        raise ValueError("capacity_prbs must be >= 1")
    if density_profile is None:
        positions = np.arange(n_stations) * spacing_km
    else:
        density = np.asarray(density_profile, dtype=float)
        if density.shape != (n_stations,):
            raise ValueError("density_profile must have one entry per station")
        if np.any(density <= 0):
            raise ValueError("density_profile entries must be > 0")
        gaps = spacing_km / density
        gaps[0] = 0.0
        positions = np.cumsum(gaps)
    stations = tuple(
        BaseStation(id=i, position_km=float(positions[i]), capacity_prbs=capacity_prbs)
        for i in range(n_stations)
    )
    return NetworkTopology(stations=stations)
