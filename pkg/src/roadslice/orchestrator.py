"""Emergency-slice resource allocation: exact integer solver plus oracle.

The problem: given per-station capacities, per-slice reserved quotas and an
emergency slice that must receive its fixed quota during the emergency
window, choose integer per-interval allocations ``z`` minimizing the total
capacity deficit ``pi``.  Constraints per station:

* capacity: the allocations of all slices may exceed capacity only by the
  (penalized) deficit ``pi``;
* deferral: each regular slice's unserved reserved quota over the emergency
  window must fit within its reserved quota in the following
  ``tolerance``-many intervals (the traffic can wait that long);
* priority: the emergency slice's allocation equals its quota, always;
* everything integer and nonnegative.

Stations do not interact, so the solver works station by station: a greedy
incumbent (serve the highest-priority slices first, shed overload from the
most delay-tolerant ones) seeds a best-first branch-and-bound over the LP
relaxation.  A brute-force enumerator over bounded integer grids serves as
the independent optimality oracle for small instances.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import NoEmergencyError, SearchSpaceTooLargeError
from .events import Severity
from .topology import NetworkTopology

INT_TOL = 1e-6
DEFAULT_BITS_PER_PRB = 50_000.0  # bits one PRB carries per decision interval
DEFAULT_INTERVAL_MS = 100.0


@dataclass(frozen=True)
class SliceSpec:
    """A running slice: SLA figures plus its reserved per-station quota."""

    id: int
    name: str
    throughput_mbps: float
    latency_ms: float
    tolerance_intervals: int  # max intervals traffic may queue before drop
    quota_prbs: int

    def __post_init__(self):
        if self.id < 1:
            raise ValueError("slice ids start at 1 (0 is reserved for the emergency slice)")
        if self.tolerance_intervals < 1:
            raise ValueError("tolerance_intervals must be >= 1")
        if self.quota_prbs < 0:
            raise ValueError("quota_prbs must be >= 0")


def priority_order(slices: Sequence[SliceSpec]) -> list[int]:
    """Indices of ``slices`` from highest to lowest priority.

    Priority is ascending delay tolerance, ties broken by ascending id; the
    emergency slice (id 0) always outranks these.
    """
    return sorted(range(len(slices)),
                  key=lambda i: (slices[i].tolerance_intervals, slices[i].id))


def throughput_to_prbs(rate_mbps: float, bits_per_prb_per_interval: float,
                       interval_ms: float = DEFAULT_INTERVAL_MS) -> int:
    """PRBs per interval needed to carry ``rate_mbps``."""
    if rate_mbps <= 0 or bits_per_prb_per_interval <= 0 or interval_ms <= 0:
        raise ValueError("rate, bits-per-PRB and interval must all be > 0")
    bits_per_interval = rate_mbps * 1e6 * (interval_ms / 1000.0)
    return int(math.ceil(bits_per_interval / bits_per_prb_per_interval))


@dataclass(frozen=True)
class IlpInstance:
    """One emergency allocation problem over the affected stations."""

    station_ids: tuple[int, ...]
    capacities: np.ndarray  # (Nt,)
    slices: tuple[SliceSpec, ...]
    quotas: np.ndarray  # (Nt, S, T) reserved PRBs of regular slices
    ens_quota: np.ndarray  # (Nt, T); zero after the emergency window
    theta: int  # emergency active for t = 0..theta inclusive
    horizon: int
    interval_ms: float = DEFAULT_INTERVAL_MS
    sliding_deferral: bool = False
    horizon_extended: bool = False

    def __post_init__(self):
        nt, s, t = len(self.station_ids), len(self.slices), self.horizon
        if self.capacities.shape != (nt,):
            raise ValueError("capacities must have one entry per station")
        if self.quotas.shape != (nt, s, t):
            raise ValueError(f"quotas must be shaped {(nt, s, t)}")
        if self.ens_quota.shape != (nt, t):
            raise ValueError(f"ens_quota must be shaped {(nt, t)}")
        if np.any(self.quotas < 0) or np.any(self.ens_quota < 0):
            raise ValueError("quotas must be nonnegative")
        if not 0 <= self.theta < self.horizon:
            raise ValueError("theta must lie within the horizon")
        max_tol = max((sl.tolerance_intervals for sl in self.slices), default=0)
        if self.horizon < self.theta + max_tol + 1:
            raise ValueError(
                "horizon must cover the emergency window plus the largest tolerance"
            )
        if np.any(self.ens_quota[:, self.theta + 1 :] != 0):
            raise ValueError("emergency quota must be zero after the window")

    @property
    def n_stations(self) -> int:
        return len(self.station_ids)

    def deferral_headroom(self, n: int, s: int) -> int:
        """Reserved quota available to absorb deferred traffic after the window."""
        lam = self.slices[s].tolerance_intervals
        return int(self.quotas[n, s, self.theta + 1 : self.theta + 1 + lam].sum())


@dataclass
class AllocationPlan:
    """Solver output; slice axis index 0 is the emergency slice."""

    z: np.ndarray  # (Nt, S+1, T)
    pi: np.ndarray  # (Nt, T)
    objective: int
    status: str  # "Optimal" or "Heuristic"


def build_instance(topology: NetworkTopology, affected: Sequence[int],
                   slices: Sequence[SliceSpec], event,
                   horizon: int | None = None,
                   interval_ms: float = DEFAULT_INTERVAL_MS,
                   bits_per_prb: float = DEFAULT_BITS_PER_PRB,
                   sliding_deferral: bool = False) -> IlpInstance:
    """Instance from a detected event: emergency quota and window per severity."""
    if event.severity == Severity.NONE:
        raise NoEmergencyError("event severity is None; no emergency slice to place")
    affected = sorted(set(int(n) for n in affected))
    if not affected:
        raise ValueError("affected set must be nonempty")
    if not slices:
        raise ValueError("need at least one running slice")
    from .classify import ENS_REQUIREMENTS

    theta_minutes, rate = ENS_REQUIREMENTS[event.severity]
    n_window = max(1, int(math.ceil(theta_minutes * 60_000.0 / interval_ms)))
    theta = n_window - 1
    max_tol = max(sl.tolerance_intervals for sl in slices)
    min_horizon = theta + max_tol + 1
    extended = horizon is None or horizon < min_horizon
    horizon = max(horizon or 0, min_horizon)

    nt = len(affected)
    capacities = topology.capacities()[affected]
    per_slice = np.array([sl.quota_prbs for sl in slices], dtype=int)
    quotas = np.broadcast_to(
        per_slice[None, :, None], (nt, len(slices), horizon)
    ).copy()
    q0 = throughput_to_prbs(rate, bits_per_prb, interval_ms)
    ens = np.zeros((nt, horizon), dtype=int)
    ens[:, : theta + 1] = q0
    return IlpInstance(
        station_ids=tuple(affected),
        capacities=capacities,
        slices=tuple(slices),
        quotas=quotas,
        ens_quota=ens,
        theta=theta,
        horizon=horizon,
        interval_ms=interval_ms,
        sliding_deferral=sliding_deferral,
        horizon_extended=extended,
    )


# ---------------------------------------------------------------------------
# per-station pieces
# ---------------------------------------------------------------------------


def _station_lp(instance: IlpInstance, n: int):
    """LP relaxation data for one station: window variables only.

    Variable order: z[s, t] for s in slice order, t in 0..theta, then pi[t].
    Returns (c, A_ub csr, b_ub, z_caps).
    """
    w = instance.theta + 1
    s_cnt = len(instance.slices)
    nz = s_cnt * w
    c = np.concatenate([np.zeros(nz), np.ones(w)])
    q = instance.quotas[n, :, :w]
    q0 = instance.ens_quota[n, :w]
    cap = float(instance.capacities[n])

    rows, cols, vals, b = [], [], [], []
    r = 0
    for t in range(w):  # capacity: sum_s z - pi <= C - Q0
        for s in range(s_cnt):
            rows.append(r), cols.append(s * w + t), vals.append(1.0)
        rows.append(r), cols.append(nz + t), vals.append(-1.0)
        b.append(cap - float(q0[t]))
        r += 1
    if instance.sliding_deferral:
        for s in range(s_cnt):
            lam = instance.slices[s].tolerance_intervals
            for tau in range(w):
                for t in range(tau + 1):
                    rows.append(r), cols.append(s * w + t), vals.append(-1.0)
                future = instance.quotas[n, s, tau + 1 : tau + 1 + lam].sum()
                b.append(float(future) - float(q[s, : tau + 1].sum()))
                r += 1
    else:
        for s in range(s_cnt):  # deferral: -sum_t z <= H - sum_t Q
            for t in range(w):
                rows.append(r), cols.append(s * w + t), vals.append(-1.0)
            b.append(float(instance.deferral_headroom(n, s)) - float(q[s].sum()))
            r += 1
    a_ub = sparse.csr_matrix((vals, (rows, cols)), shape=(r, nz + w))
    # serving more than a slice's whole-window quota in one slot never helps
    z_caps = np.repeat(q.sum(axis=1), w).astype(float)
    return c, a_ub, np.array(b), z_caps


def _station_pi(instance: IlpInstance, n: int, z_window: np.ndarray) -> np.ndarray:
    w = instance.theta + 1
    load = instance.ens_quota[n, :w] + z_window.sum(axis=0)
    return np.maximum(0, load - instance.capacities[n]).astype(int)


def _station_feasible(instance: IlpInstance, n: int, z_window: np.ndarray) -> bool:
    w = instance.theta + 1
    q = instance.quotas[n, :, :w]
    if instance.sliding_deferral:
        for s in range(len(instance.slices)):
            lam = instance.slices[s].tolerance_intervals
            backlog = np.cumsum(q[s] - z_window[s])
            for tau in range(w):
                future = instance.quotas[n, s, tau + 1 : tau + 1 + lam].sum()
                if backlog[tau] > future:
                    return False
        return True
    for s in range(len(instance.slices)):
        unserved = int(q[s].sum() - z_window[s].sum())
        if unserved > instance.deferral_headroom(n, s):
            return False
    return True


def _greedy_station(instance: IlpInstance, n: int) -> np.ndarray:
    """Feasible integer window allocation seeding the search.

    For the whole-window deferral form this is a water-filling construction:
    each slice's required total (reserved quota minus deferral headroom) is
    placed into free capacity, highest priority first, preferring each
    slice's own slots; the remainder overflows into deficit, and leftover
    capacity is topped up toward z = Q so uncongested instances return the
    reservations verbatim.  Total overflow then equals the LP bound, so the
    branch-and-bound closes at the root.

    The sliding variant only defers within each rolling window, so there the
    seed conservatively sheds overload against the tightest window's budget.
    """
    w = instance.theta + 1
    s_cnt = len(instance.slices)
    q = instance.quotas[n, :, :w]
    cap = int(instance.capacities[n])
    if s_cnt == 0:
        return q.copy()

    if instance.sliding_deferral:
        z = q.copy()
        budgets = np.empty(s_cnt, dtype=int)
        for s in range(s_cnt):
            lam = instance.slices[s].tolerance_intervals
            budgets[s] = min(
                int(instance.quotas[n, s, tau + 1 : tau + 1 + lam].sum())
                for tau in range(w)
            )
        shed_order = list(reversed(priority_order(instance.slices)))
        for t in range(w):
            over = int(instance.ens_quota[n, t]) + int(z[:, t].sum()) - cap
            for s in shed_order:
                if over <= 0:
                    break
                take = min(int(z[s, t]), int(budgets[s]), over)
                z[s, t] -= take
                budgets[s] -= take
                over -= take
        return z

    free = np.maximum(0, cap - instance.ens_quota[n, :w]).astype(int)
    z = np.zeros((s_cnt, w), dtype=int)
    order = priority_order(instance.slices)
    for s in order:
        need = max(0, int(q[s].sum()) - instance.deferral_headroom(n, s))
        for t in range(w):  # natural placement: the slice's own reserved slots
            amt = min(int(q[s, t]), int(free[t]), need)
            z[s, t] += amt
            free[t] -= amt
            need -= amt
        for t in range(w):  # pre-serve into any remaining free capacity
            if need == 0:
                break
            amt = min(int(free[t]), need)
            z[s, t] += amt
            free[t] -= amt
            need -= amt
        for t in range(w):
            # free capacity is gone; the rest overflows into deficit, spread
            # along the slice's own quota profile so the plan stays usable
            # interval by interval (the objective is placement-invariant)
            if need == 0:
                break
            amt = min(max(0, int(q[s, t]) - int(z[s, t])), need)
            z[s, t] += amt
            need -= amt
        if need > 0:
            raise AssertionError("requirement exceeds window quota; unreachable")
    for s in order:  # cosmetic top-up toward z = Q within leftover capacity
        for t in range(w):
            amt = min(max(0, int(q[s, t]) - int(z[s, t])), int(free[t]))
            z[s, t] += amt
            free[t] -= amt
    return z


def _relaxation_bound(instance: IlpInstance, n: int) -> int:
    """LP-relaxation optimum of the whole-window deferral form, in closed
    form: unavoidable emergency overflow plus required service beyond the
    free capacity of the window (slices are interchangeable per slot, only
    their window totals are constrained, so the relaxation water-fills)."""
    w = instance.theta + 1
    cap = int(instance.capacities[n])
    q0 = instance.ens_quota[n, :w]
    forced = int(np.maximum(0, q0 - cap).sum())
    free = int(np.maximum(0, cap - q0).sum())
    required = sum(
        max(0, int(instance.quotas[n, s, :w].sum()) - instance.deferral_headroom(n, s))
        for s in range(len(instance.slices))
    )
    return forced + max(0, required - free)


def _solve_station(instance: IlpInstance, n: int,
                   node_limit: int) -> tuple[np.ndarray, bool]:
    """Exact window allocation for one station via branch-and-bound.

    Returns (z_window, proved_optimal).
    """
    w = instance.theta + 1
    s_cnt = len(instance.slices)
    incumbent = _greedy_station(instance, n)
    incumbent_obj = int(_station_pi(instance, n, incumbent).sum())
    if s_cnt == 0 or incumbent_obj == 0:
        return incumbent, True
    if not instance.sliding_deferral:
        # the analytic relaxation bound usually certifies the incumbent at
        # the root, skipping the numeric LP entirely
        if incumbent_obj <= _relaxation_bound(instance, n):
            return incumbent, True

    c, a_ub, b_ub, z_caps = _station_lp(instance, n)
    nz = s_cnt * w

    def solve_lp(lo, hi):
        bounds = [(lo[j], hi[j]) for j in range(nz)] + [(0, None)] * w
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
        return res

    root_lo = np.zeros(nz)
    root_hi = z_caps.copy()
    res = solve_lp(root_lo, root_hi)
    if res.status != 0:  # the deficit variables make every instance feasible
        return incumbent, False
    root_bound = res.fun

    # reduced-cost fixing at the root: a unit increase of a variable sitting
    # at its lower bound costs at least its reduced cost, so cap how far it
    # can move before the node can no longer beat the incumbent.
    if incumbent_obj - 1 >= 0 and res.lower is not None:
        rc = np.asarray(res.lower.marginals)[:nz]
        slack_budget = (incumbent_obj - 1) - root_bound
        for j in range(nz):
            if rc[j] > INT_TOL and slack_budget >= 0:
                max_up = math.floor(slack_budget / rc[j] + 1e-9)
                root_hi[j] = min(root_hi[j], root_lo[j] + max_up)

    counter = 0
    heap = [(root_bound, counter, root_lo, root_hi, res)]
    proved = True
    nodes = 0
    while heap:
        bound, _, lo, hi, res = heapq.heappop(heap)
        if math.ceil(bound - 1e-9) >= incumbent_obj:
            break  # best-first: nothing left can improve
        nodes += 1
        if nodes > node_limit:
            proved = False
            break
        x = res.x
        zx = x[:nz]
        frac = np.abs(zx - np.round(zx))
        if np.all(frac <= INT_TOL):
            z_int = np.round(zx).astype(int).reshape(s_cnt, w)
            if _station_feasible(instance, n, z_int):
                obj = int(_station_pi(instance, n, z_int).sum())
                if obj < incumbent_obj:
                    incumbent, incumbent_obj = z_int, obj
            continue
        # branch on the most fractional variable, lowest index on ties
        dist = np.where(frac > INT_TOL, np.abs(frac - 0.5), np.inf)
        j = int(np.argmin(dist))
        for child_lo, child_hi in (
            (lo, _with(hi, j, math.floor(zx[j]))),
            (_with(lo, j, math.ceil(zx[j])), hi),
        ):
            if child_lo[j] > child_hi[j]:
                continue
            child_res = solve_lp(child_lo, child_hi)
            if child_res.status != 0:
                continue
            if math.ceil(child_res.fun - 1e-9) >= incumbent_obj:
                continue
            counter += 1
            heapq.heappush(
                heap, (child_res.fun, counter, child_lo, child_hi, child_res)
            )
    return incumbent, proved


def _with(arr: np.ndarray, j: int, val: float) -> np.ndarray:
    out = arr.copy()
    out[j] = val
    return out


def _tail_fill(instance: IlpInstance, n: int) -> np.ndarray:
    """Canonical allocation after the window: serve quotas within capacity,
    trimming the most delay-tolerant slices first (deficit stays zero)."""
    w = instance.theta + 1
    t_tail = instance.horizon - w
    q = instance.quotas[n, :, w:].copy()
    if q.size == 0:
        return q
    cap = int(instance.capacities[n])
    shed_order = list(reversed(priority_order(instance.slices)))
    for t in range(t_tail):
        over = int(q[:, t].sum()) - cap
        for s in shed_order:
            if over <= 0:
                break
            take = min(int(q[s, t]), over)
            q[s, t] -= take
            over -= take
    return q


def solve(instance: IlpInstance, node_limit: int = 100_000) -> AllocationPlan:
    """Optimal integer allocation (status Heuristic only if the node limit
    is hit; the deficit variables make every instance feasible)."""
    nt = instance.n_stations
    s_cnt = len(instance.slices)
    w = instance.theta + 1
    z = np.zeros((nt, s_cnt + 1, instance.horizon), dtype=int)
    pi = np.zeros((nt, instance.horizon), dtype=int)
    all_proved = True
    for n in range(nt):
        z[n, 0] = instance.ens_quota[n]
        z_window, proved = _solve_station(instance, n, node_limit)
        all_proved &= proved
        z[n, 1:, :w] = z_window
        z[n, 1:, w:] = _tail_fill(instance, n)
        pi[n, :w] = _station_pi(instance, n, z_window)
    return AllocationPlan(
        z=z, pi=pi, objective=int(pi.sum()),
        status="Optimal" if all_proved else "Heuristic",
    )


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------


def brute_force_solve(instance: IlpInstance, cap: int = 10_000_000
                      ) -> AllocationPlan:
    """Exhaustive enumeration over bounded integer grids; provably optimal.

    Dominance facts used to bound the grid (each keeps at least one optimum
    inside the search box):

    * after the emergency window no constraint couples the variables, so
      z = 0 / pi = 0 there is optimal;
    * given z, the minimal feasible deficit is pi = max(0, load - C);
    * serving more than a slice's whole-window reserved quota in a single
      slot never helps, so each z variable is capped by that total.

    All z variables of all stations and slices are enumerated jointly.
    """
    nt = instance.n_stations
    s_cnt = len(instance.slices)
    w = instance.theta + 1
    caps_per_var = []
    for n in range(nt):
        totals = instance.quotas[n, :, :w].sum(axis=1)
        for s in range(s_cnt):
            caps_per_var.extend([int(totals[s])] * w)
    radices = np.array([cv + 1 for cv in caps_per_var], dtype=np.int64)
    n_vars = len(radices)
    total = int(np.prod(radices, dtype=object)) if n_vars else 1
    if total > cap:
        raise SearchSpaceTooLargeError(
            f"{total} candidate assignments exceed the cap of {cap}"
        )

    capacities = instance.capacities.astype(np.int64)
    q0 = instance.ens_quota[:, :w].astype(np.int64)
    best_obj = None
    best_id = None
    chunk = 200_000
    for lo in range(0, total, chunk):
        ids = np.arange(lo, min(lo + chunk, total), dtype=np.int64)
        zc = np.empty((len(ids), n_vars), dtype=np.int64)
        rem = ids.copy()
        for j in range(n_vars - 1, -1, -1):
            zc[:, j] = rem % radices[j]
            rem //= radices[j]
        zc3 = zc.reshape(len(ids), nt, s_cnt, w)
        feasible = np.ones(len(ids), dtype=bool)
        if instance.sliding_deferral:
            for n in range(nt):
                for s in range(s_cnt):
                    lam = instance.slices[s].tolerance_intervals
                    backlog = np.cumsum(
                        instance.quotas[n, s, :w][None, :] - zc3[:, n, s, :], axis=1
                    )
                    for tau in range(w):
                        future = instance.quotas[n, s, tau + 1 : tau + 1 + lam].sum()
                        feasible &= backlog[:, tau] <= future
        else:
            for n in range(nt):
                for s in range(s_cnt):
                    unserved = instance.quotas[n, s, :w].sum() - zc3[:, n, s, :].sum(axis=1)
                    feasible &= unserved <= instance.deferral_headroom(n, s)
        load = q0[None, :, :] + zc3.sum(axis=2)  # (chunk, nt, w)
        obj = np.maximum(0, load - capacities[None, :, None]).sum(axis=(1, 2))
        obj = np.where(feasible, obj, np.iinfo(np.int64).max)
        k = int(np.argmin(obj))
        if feasible[k] and (best_obj is None or obj[k] < best_obj):
            best_obj = int(obj[k])
            best_id = int(ids[k])

    if best_obj is None:
        raise RuntimeError("no feasible assignment found (should be impossible)")

    # rebuild the winning assignment
    zvec = np.empty(n_vars, dtype=np.int64)
    rem = best_id
    for j in range(n_vars - 1, -1, -1):
        zvec[j] = rem % radices[j]
        rem //= radices[j]
    z_window = zvec.reshape(nt, s_cnt, w)
    z = np.zeros((nt, s_cnt + 1, instance.horizon), dtype=int)
    pi = np.zeros((nt, instance.horizon), dtype=int)
    for n in range(nt):
        z[n, 0] = instance.ens_quota[n]
        z[n, 1:, :w] = z_window[n]
        pi[n, :w] = _station_pi(instance, n, z_window[n])
    return AllocationPlan(z=z, pi=pi, objective=best_obj, status="Optimal")


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass
class PlanReport:
    capacity_residual: np.ndarray  # (Nt, T)
    deferral_residual: np.ndarray  # (Nt, S)
    ens_equality_residual: np.ndarray  # (Nt, T)
    negativity_residual: int
    ok: bool = field(init=False)

    def __post_init__(self):
        self.ok = (
            self.capacity_residual.max(initial=0) == 0
            and self.deferral_residual.max(initial=0) == 0
            and self.ens_equality_residual.max(initial=0) == 0
            and self.negativity_residual == 0
        )


def validate_plan(plan: AllocationPlan, instance: IlpInstance) -> PlanReport:
    nt, s1, t_len = plan.z.shape
    if (nt, s1 - 1, t_len) != instance.quotas.shape or plan.pi.shape != (nt, t_len):
        raise ValueError("plan shape does not match instance")
    w = instance.theta + 1
    load = plan.z.sum(axis=1)
    cap_res = np.maximum(0, load - instance.capacities[:, None] - plan.pi)
    defer = np.zeros((nt, s1 - 1), dtype=int)
    for n in range(nt):
        for s in range(s1 - 1):
            if instance.sliding_deferral:
                lam = instance.slices[s].tolerance_intervals
                worst = 0
                backlog = np.cumsum(
                    instance.quotas[n, s, :w] - plan.z[n, s + 1, :w]
                )
                for tau in range(w):
                    future = instance.quotas[n, s, tau + 1 : tau + 1 + lam].sum()
                    worst = max(worst, int(backlog[tau] - future))
                defer[n, s] = max(0, worst)
            else:
                unserved = int(
                    instance.quotas[n, s, :w].sum() - plan.z[n, s + 1, :w].sum()
                )
                defer[n, s] = max(0, unserved - instance.deferral_headroom(n, s))
    ens_res = np.abs(plan.z[:, 0, :] - instance.ens_quota)
    neg = int(np.sum(plan.z < 0) + np.sum(plan.pi < 0))
    return PlanReport(
        capacity_residual=cap_res.astype(int),
        deferral_residual=defer,
        ens_equality_residual=ens_res.astype(int),
        negativity_residual=neg,
    )


def zero_deficit_certificate(plan: AllocationPlan, instance: IlpInstance) -> bool:
    """True iff the plan is feasible with literally no deficit anywhere."""
    return bool(plan.objective == 0 and np.all(plan.pi == 0)
                and validate_plan(plan, instance).ok)


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------


def instance_to_json(instance: IlpInstance) -> str:
    return json.dumps({
        "station_ids": list(instance.station_ids),
        "capacities": instance.capacities.tolist(),
        "slices": [
            {
                "id": sl.id, "name": sl.name,
                "throughput_mbps": sl.throughput_mbps,
                "latency_ms": sl.latency_ms,
                "tolerance_intervals": sl.tolerance_intervals,
                "quota_prbs": sl.quota_prbs,
            }
            for sl in instance.slices
        ],
        "quotas": instance.quotas.tolist(),
        "ens_quota": instance.ens_quota.tolist(),
        "theta": instance.theta,
        "horizon": instance.horizon,
        "interval_ms": instance.interval_ms,
        "sliding_deferral": instance.sliding_deferral,
    }, indent=2)


def instance_from_json(text: str) -> IlpInstance:
    d = json.loads(text)
    return IlpInstance(
        station_ids=tuple(d["station_ids"]),
        capacities=np.array(d["capacities"], dtype=int),
        slices=tuple(SliceSpec(**sl) for sl in d["slices"]),
        quotas=np.array(d["quotas"], dtype=int),
        ens_quota=np.array(d["ens_quota"], dtype=int),
        theta=d["theta"],
        horizon=d["horizon"],
        interval_ms=d.get("interval_ms", DEFAULT_INTERVAL_MS),
        sliding_deferral=d.get("sliding_deferral", False),
    )


def plan_to_json(plan: AllocationPlan) -> str:
    return json.dumps({
        "z": plan.z.tolist(),
        "pi": plan.pi.tolist(),
        "objective": plan.objective,
        "status": plan.status,
    }, indent=2)


def plan_from_json(text: str) -> AllocationPlan:
    d = json.loads(text)
    return AllocationPlan(
        z=np.array(d["z"], dtype=int),
        pi=np.array(d["pi"], dtype=int),
        objective=d["objective"],
        status=d["status"],
    )


def save_instance(instance: IlpInstance, path: str | Path) -> None:
    Path(path).write_text(instance_to_json(instance))


def load_instance(path: str | Path) -> IlpInstance:
    return instance_from_json(Path(path).read_text())


def save_plan(plan: AllocationPlan, path: str | Path) -> None:
    Path(path).write_text(plan_to_json(plan))


def load_plan(path: str | Path) -> AllocationPlan:
    return plan_from_json(Path(path).read_text())
