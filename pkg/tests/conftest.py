from __future__ import annotations

import numpy as np
import pytest

from roadslice.events import Direction, EventSpec, Severity
from roadslice.generator import SignatureConfig, generate_baseline, inject_events, sample_events
from roadslice.topology import build_topology


@pytest.fixture(scope="session")
def tiny_topology():
    return build_topology(8, 2.0, 50)


@pytest.fixture(scope="session")
def tiny_traces(tiny_topology):
    """Four event-free days on eight stations."""
    return generate_baseline(tiny_topology, 4, seed=11)


@pytest.fixture(scope="session")
def tiny_eventful(tiny_topology, tiny_traces):
    specs = [
        EventSpec(source_station=3, start=40, duration_intervals=6,
                  severity=Severity.SEVERE, direction=Direction.EAST_TO_WEST),
        EventSpec(source_station=6, start=200, duration_intervals=4,
                  severity=Severity.MODERATE, direction=Direction.WEST_TO_EAST),
    ]
    traces, records = inject_events(tiny_traces, tiny_topology, specs)
    return traces, records


def rng_for(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
