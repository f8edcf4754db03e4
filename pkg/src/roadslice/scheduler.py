"""Interval-by-interval slice scheduling against an allocation plan.

Queueing model
--------------

Traffic arrives as integer PRB-equivalents per (station, slice, interval).
Each interval is split into ``opportunities`` equal scheduling rounds; a
slice's per-interval budget is spread over the rounds (front-loaded, so the
first rounds get the ceil share).  Queues are FIFO per (station, slice).

Waiting time of a PRB served at round ``j`` of interval ``t2`` after
arriving in interval ``t1`` is recorded as::

    wait = max(0, (t2 - t1) - 1 + (j + 1) / opportunities)   [intervals]

so service within the arrival interval counts as zero wait, one opportunity
per interval reproduces plain interval counting, and refining the round grid
(1 -> 2 -> 4 ...) can only lower each PRB's recorded wait.  Traffic still
queued after interval ``t1 + tolerance`` is dropped with wait exactly equal
to the tolerance.

Budgets respect physics: per interval a station can spend at most its
(channel-degraded) capacity.  The emergency slice's allocation is walled
off first and is never lent to other slices; regular slices draw their
plan allocation in priority order and, with lending enabled, pass unused
PRBs down the priority list within each round.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyCdfError, InvalidComparisonError
from .orchestrator import (
    DEFAULT_BITS_PER_PRB,
    AllocationPlan,
    SliceSpec,
    priority_order,
    throughput_to_prbs,
)

ENS_TOLERANCE = 1  # the emergency slice queues at most one interval


@dataclass(frozen=True)
class DemandTrace:
    """Arriving traffic in integer PRBs: demand[n, s, t]; slice 0 = emergency."""

    demand: np.ndarray

    def __post_init__(self):
        if self.demand.ndim != 3:
            raise ValueError("demand must be (station, slice, interval)")
        if np.any(self.demand < 0):
            raise ValueError("demand must be nonnegative")

    def digest(self) -> str:
        arr = np.ascontiguousarray(self.demand.astype(np.int64))
        return hashlib.sha256(arr.tobytes()).hexdigest()


@dataclass
class ScheduleMetrics:
    served: np.ndarray  # (Nt, S+1, T)
    queued: np.ndarray  # backlog at end of each interval
    dropped: np.ndarray
    # per slice: (waits in intervals, PRB weights) of served traffic
    latency_samples: dict[int, tuple[np.ndarray, np.ndarray]]
    sla_violated_by_slice: np.ndarray  # (S+1,) PRBs served past tolerance or dropped
    sla_violated_total: int
    served_late_total: int  # served after the arrival interval (at SLA risk)
    ens_underserved: bool
    demand_digest: str
    plan_digest: str
    opportunities: int
    interval_ms: float


def _plan_digest(z: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(z.astype(np.int64)).tobytes()).hexdigest()


def _round_share(budget: int, j: int, k: int) -> int:
    """Front-loaded even split of ``budget`` over ``k`` rounds.

    Round ``j`` gets ceil(budget*(j+1)/k) - ceil(budget*j/k); early rounds
    take the larger shares so refining the grid never delays service.
    """
    return (budget * (j + 1) + k - 1) // k - (budget * j + k - 1) // k


def simulate(plan: AllocationPlan, demands: DemandTrace,
             slices: Sequence[SliceSpec], lending: bool = True,
             opportunities: int = 1,
             capacities: np.ndarray | None = None,
             capacity_mult: np.ndarray | None = None,
             interval_ms: float = 100.0) -> ScheduleMetrics:
    """Replay the plan against arriving traffic.

    ``capacities`` (per station) caps real spending per interval; leave None
    to trust the plan (capacity = total allocation).  ``capacity_mult`` is an
    optional (Nt, T) channel-degradation multiplier.
    """
    z = plan.z
    nt, s1, t_len = z.shape
    if demands.demand.shape != (nt, s1, t_len):
        raise ValueError(
            f"demand shape {demands.demand.shape} does not match plan {(nt, s1, t_len)}"
        )
    if opportunities < 1:
        raise ValueError("opportunities must be >= 1")
    if len(slices) != s1 - 1:
        raise ValueError("slice list must match the plan's regular slices")

    tol = np.empty(s1, dtype=int)
    tol[0] = ENS_TOLERANCE
    for i, sl in enumerate(slices):
        tol[i + 1] = sl.tolerance_intervals
    # service order: emergency first, then priority-ranked regular slices
    order = [0] + [i + 1 for i in priority_order(slices)]

    served = np.zeros((nt, s1, t_len), dtype=int)
    queued = np.zeros((nt, s1, t_len), dtype=int)
    dropped = np.zeros((nt, s1, t_len), dtype=int)
    waits: dict[int, list[tuple[float, int]]] = {s: [] for s in range(s1)}
    late = 0
    ens_underserved = False
    k = opportunities

    for n in range(nt):
        queues: list[list[list[int]]] = [[] for _ in range(s1)]  # [arrival_t, prbs]
        for t in range(t_len):
            for s in range(s1):
                d = int(demands.demand[n, s, t])
                if d > 0:
                    queues[s].append([t, d])
            cap = None
            if capacities is not None:
                cap = int(capacities[n])
                if capacity_mult is not None:
                    cap = int(np.floor(cap * float(capacity_mult[n, t]) + 1e-9))
            # wall off budgets for this interval, highest priority first
            budgets = np.zeros(s1, dtype=int)
            remaining_wall = cap
            for s in order:
                want = int(z[n, s, t])
                if remaining_wall is None:
                    budgets[s] = want
                else:
                    budgets[s] = min(want, remaining_wall)
                    remaining_wall -= budgets[s]
            for j in range(k):
                carry = 0  # lendable PRBs cascading down the priority list
                for s in order:
                    share = _round_share(int(budgets[s]), j, k)
                    avail = share + (carry if s != 0 else 0)
                    q = queues[s]
                    while q and avail > 0:
                        arr_t, prbs = q[0]
                        take = min(prbs, avail)
                        avail -= take
                        q[0][1] -= take
                        served[n, s, t] += take
                        wait = max(0.0, (t - arr_t) - 1.0 + (j + 1) / k)
                        waits[s].append((wait, take))
                        if t > arr_t:
                            late += take
                        if q[0][1] == 0:
                            q.pop(0)
                    if s == 0:
                        carry = 0  # emergency leftovers are never lent
                    elif lending:
                        carry = avail
                    else:
                        carry = 0
            for s in range(s1):
                q = queues[s]
                while q and t - q[0][0] >= tol[s]:
                    arr_t, prbs = q.pop(0)
                    dropped[n, s, t] += prbs
                    if s == 0:
                        ens_underserved = True
                queued[n, s, t] = sum(prbs for _, prbs in q)

    if np.any(dropped[:, 0, :] > 0) or any(w > 0 for w, _ in waits[0]):
        ens_underserved = True

    latency_samples = {}
    for s in range(s1):
        if waits[s]:
            w = np.array([x[0] for x in waits[s]])
            p = np.array([x[1] for x in waits[s]], dtype=int)
        else:
            w = np.empty(0)
            p = np.empty(0, dtype=int)
        latency_samples[s] = (w, p)

    served_beyond_tol = np.zeros(s1, dtype=int)
    for s in range(s1):
        w, p = latency_samples[s]
        served_beyond_tol[s] = int(p[w > tol[s] + 1e-9].sum())
    violated = served_beyond_tol + dropped.sum(axis=(0, 2))

    return ScheduleMetrics(
        served=served,
        queued=queued,
        dropped=dropped,
        latency_samples=latency_samples,
        sla_violated_by_slice=violated,
        sla_violated_total=int(violated.sum()),
        served_late_total=int(late),
        ens_underserved=bool(ens_underserved),
        demand_digest=demands.digest(),
        plan_digest=_plan_digest(z),
        opportunities=k,
        interval_ms=interval_ms,
    )


def simulate_fixed_quota(quota_fractions: Sequence[float],
                         capacities: np.ndarray, demands: DemandTrace,
                         slices: Sequence[SliceSpec], lending: bool = True,
                         opportunities: int = 1,
                         interval_ms: float = 100.0) -> ScheduleMetrics:
    """Static allocation: each slice gets floor(fraction * C) every interval."""
    if len(quota_fractions) != len(slices):
        raise ValueError("one quota fraction per slice required")
    if sum(quota_fractions) > 1.0 + 1e-9:
        raise ValueError("quota fractions must sum to at most 1")
    nt, s1, t_len = demands.demand.shape
    if s1 != len(slices) + 1:
        raise ValueError("demand must include the (possibly idle) emergency row")
    z = np.zeros((nt, s1, t_len), dtype=int)
    for i, frac in enumerate(quota_fractions):
        z[:, i + 1, :] = np.floor(frac * np.asarray(capacities))[:, None]
    plan = AllocationPlan(z=z, pi=np.zeros((nt, t_len), dtype=int),
                          objective=0, status="Optimal")
    return simulate(plan, demands, slices, lending=lending,
                    opportunities=opportunities, capacities=np.asarray(capacities),
                    interval_ms=interval_ms)


def latency_cdf(metrics: ScheduleMetrics, slice_id: int) -> np.ndarray:
    """Empirical CDF points (latency_ms, cumulative fraction) for one slice."""
    if slice_id not in metrics.latency_samples:
        raise KeyError(f"no such slice {slice_id}")
    w, p = metrics.latency_samples[slice_id]
    if len(w) == 0:
        raise EmptyCdfError(f"slice {slice_id} served no traffic")
    order = np.argsort(w, kind="stable")
    w, p = w[order], p[order]
    uniq, idx = np.unique(np.round(w * metrics.interval_ms, 9), return_inverse=True)
    weights = np.bincount(idx, weights=p)
    cum = np.cumsum(weights) / p.sum()
    return np.column_stack([uniq, cum])


def mean_latency_ms(metrics: ScheduleMetrics, slice_id: int) -> float:
    w, p = metrics.latency_samples[slice_id]
    if len(w) == 0:
        raise EmptyCdfError(f"slice {slice_id} served no traffic")
    return float((w * p).sum() / p.sum() * metrics.interval_ms)


def sla_violation_reduction(metrics_off: ScheduleMetrics,
                            metrics_on: ScheduleMetrics) -> float:
    """Percent reduction of SLA-violated traffic achieved by lending."""
    if metrics_off.demand_digest != metrics_on.demand_digest:
        raise InvalidComparisonError("runs use different demand traces")
    if metrics_off.plan_digest != metrics_on.plan_digest:
        raise InvalidComparisonError("runs use different allocation plans")
    off = metrics_off.sla_violated_total
    on = metrics_on.sla_violated_total
    if off == 0:
        return 0.0
    return 100.0 * (off - on) / off


def flow_conservation_residual(metrics: ScheduleMetrics,
                               demands: DemandTrace) -> int:
    """Max |arrivals - served - dropped - final queue| over (station, slice)."""
    arrivals = demands.demand.sum(axis=2)
    accounted = (metrics.served.sum(axis=2) + metrics.dropped.sum(axis=2)
                 + metrics.queued[:, :, -1])
    return int(np.abs(arrivals - accounted).max(initial=0))


# ---------------------------------------------------------------------------
# demand synthesis for evaluation scenarios
# ---------------------------------------------------------------------------

# diurnal shapes per traffic class, normalized to peak 1: streaming-like
# classes peak in the evening, low-latency vehicular classes follow commutes
_QCI_PROFILES = {
    "embb": ((10.0, 0.35, 3.0), (20.5, 1.0, 2.6)),
    "urllc": ((8.0, 1.0, 1.5), (18.0, 0.9, 1.8)),
}


def qci_profile(kind: str, hour: np.ndarray) -> np.ndarray:
    out = np.full_like(hour, 0.25, dtype=float)
    for mu, amp, sigma in _QCI_PROFILES[kind]:
        out += amp * np.exp(-0.5 * ((hour - mu) / sigma) ** 2)
    return out / out.max()


def make_demand_trace(slices: Sequence[SliceSpec], n_stations: int,
                      horizon: int, seed: int,
                      interval_ms: float = 100.0,
                      start_hour: float = 8.0,
                      utilization: Sequence[float] | None = None,
                      profile_kinds: Sequence[str] | None = None,
                      ens_demand: np.ndarray | None = None,
                      prb_bits_per_second: float = 10.0 * DEFAULT_BITS_PER_PRB
                      ) -> DemandTrace:
    """Per-interval arriving PRBs per slice, shaped by its traffic class.

    ``utilization`` scales each slice's mean demand relative to the PRBs its
    SLA throughput requires; Poisson arrivals around that mean.
    """
    rng = np.random.default_rng(seed)
    s1 = len(slices) + 1
    demand = np.zeros((n_stations, s1, horizon), dtype=int)
    if ens_demand is not None:
        demand[:, 0, :] = ens_demand
    hour = (start_hour + np.arange(horizon) * interval_ms / 3_600_000.0) % 24.0
    bits_per_prb = prb_bits_per_second * interval_ms / 1000.0
    for i, sl in enumerate(slices):
        kind = (profile_kinds[i] if profile_kinds is not None
                else ("urllc" if sl.latency_ms <= 50 else "embb"))
        util = utilization[i] if utilization is not None else 0.8
        base = throughput_to_prbs(sl.throughput_mbps, bits_per_prb, interval_ms)
        mean = util * base * qci_profile(kind, hour)
        demand[:, i + 1, :] = rng.poisson(np.tile(mean, (n_stations, 1)))
    return DemandTrace(demand=demand)
