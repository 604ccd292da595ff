"""Smart charging scheduling: primal-dual greedy with valley filling and exchange.

Phase 1 walks the requests in non-increasing marginal value. A request that
fits is allocated slot by slot in rank order (most remaining capacity first,
later slot first on ties); one that does not fit prices its deadline window
through ``beta``. Phase 2 revisits every unselected request and swaps out
cheaper co-located requests when that frees enough room.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    TOL,
    ChargingRequest,
    DualCertificate,
    Instance,
    InvalidInstanceError,
    Schedule,
    marginal_value,
    sort_key,
    validate_instance,
)

FLAT = "flat"
RTL = "rtl"


@dataclass
class SchedulerState:
    instance: Instance
    local_load: np.ndarray  # (T, m)
    global_load: np.ndarray  # (T,)
    beta: np.ndarray  # (T,)
    allocation: dict[int, np.ndarray] = field(default_factory=dict)
    alpha: dict[int, float] = field(default_factory=dict)
    phi: dict[int, np.ndarray] = field(default_factory=dict)
    ranking: str = FLAT
    global_aware: bool = True
    rerank: bool = False

    @classmethod
    def empty(cls, instance: Instance, **options) -> "SchedulerState":
        T, m = instance.horizon, instance.m
        return cls(instance, np.zeros((T, m)), np.zeros(T), np.zeros(T), **options)

    @property
    def selected(self) -> set[int]:
        return set(self.allocation)

    def revenue(self) -> float:
        return float(sum(self.instance.request(rid).value for rid in self.allocation))

    def remaining_profile(self, request: ChargingRequest) -> np.ndarray:
        """Effective remaining capacity for slots 1..d_i of the request's station."""
        d = request.deadline
        j = request.station - 1
        local = self.instance.stations[j].cap - self.local_load[:d, j]
        if self.global_aware:
            local = np.minimum(local, self.instance.global_cap - self.global_load[:d])
        return np.maximum(local, 0.0)

    def _apply(self, request: ChargingRequest, y: np.ndarray, sign: float) -> None:
        j = request.station - 1
        self.local_load[:, j] += sign * y
        self.global_load += sign * y
        if sign < 0:
            np.maximum(self.local_load, 0.0, out=self.local_load)
            np.maximum(self.global_load, 0.0, out=self.global_load)

    def schedule(self) -> Schedule:
        return Schedule(
            self.instance.horizon,
            {rid: y.copy() for rid, y in self.allocation.items()},
            frozenset(self.allocation),
        )


def effective_remaining(state: SchedulerState, t: int, j: int) -> float:
    local = state.instance.stations[j - 1].cap - state.local_load[t - 1, j - 1]
    if not state.global_aware:
        return float(local)
    return float(min(local, state.instance.global_cap - state.global_load[t - 1]))


def feasibility_check(state: SchedulerState, request: ChargingRequest) -> bool:
    room = np.minimum(state.remaining_profile(request), request.max_rate)
    return bool(room.sum() >= request.demand - TOL)


def rank_slots(state: SchedulerState, request: ChargingRequest) -> list[int]:
    """Slots 1..d_i from highest to lowest rank."""
    slots = range(1, request.deadline + 1)
    if state.ranking == RTL:
        return sorted(slots, reverse=True)
    rem = state.remaining_profile(request)
    return sorted(slots, key=lambda t: (-round(float(rem[t - 1]), 9), -t))


def _level_fill(rem: np.ndarray, rate: float, demand: float) -> np.ndarray:
    # water level L with sum(min(rate, max(0, rem - L))) == demand
    def placed(level):
        return np.minimum(rate, np.maximum(rem - level, 0.0)).sum()

    lo, hi = -rate, float(rem.max())
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if placed(mid) >= demand:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * max(1.0, abs(hi)):
            break
    y = np.minimum(rate, np.maximum(rem - lo, 0.0))
    excess = y.sum() - demand
    if excess > 0:
        # trim the overshoot from the fullest slots so the total is exact
        for t in np.argsort(-y, kind="stable"):
            cut = min(excess, y[t])
            y[t] -= cut
            excess -= cut
            if excess <= 0:
                break
    return y


def smart_allocate(state: SchedulerState, request: ChargingRequest) -> np.ndarray:
    """Place exactly D_i for a feasible request and set its alpha."""
    T = state.instance.horizon
    y = np.zeros(T)
    rem = state.remaining_profile(request)
    if state.rerank:
        y[: request.deadline] = _level_fill(rem, request.max_rate, request.demand)
        left = request.demand - y.sum()
    else:
        left = request.demand
        for t in rank_slots(state, request):
            if left <= TOL:
                break
            amount = min(request.max_rate, float(rem[t - 1]), left)
            if amount > 0:
                y[t - 1] = amount
                left -= amount
    if left > TOL:
        raise RuntimeError(
            f"request {request.id}: {left:g} kWh left unplaced after a passing feasibility check")
    state._apply(request, y, +1.0)
    state.allocation[request.id] = y
    state.alpha[request.id] = marginal_value(request)
    return y


def extension_end(state: SchedulerState, request: ChargingRequest) -> int:
    """R(d_i): extend past the deadline across slots too full for the station's largest rate."""
    j = request.station
    K = state.instance.max_rates()[j]
    t = request.deadline
    while t < state.instance.horizon and effective_remaining(state, t + 1, j) < K:
        t += 1
    return t


def phi_factor(instance: Instance, request: ChargingRequest) -> float:
    C = instance.stations[request.station - 1].cap
    s = instance.slackness
    if s <= 1 or C <= request.max_rate:
        return math.inf
    return C / (C - request.max_rate) * s / (s - 1)


def beta_cover(state: SchedulerState, request: ChargingRequest) -> tuple[int, int]:
    """Raise beta over [t_cov, R(d_i)]; record Phi for selected requests. Returns (t_cov, R)."""
    zero = np.flatnonzero(state.beta == 0)
    t_cov = int(zero[0]) + 1 if zero.size else state.instance.horizon + 1
    R = extension_end(state, request)
    price = marginal_value(request)
    if t_cov <= R:
        state.beta[t_cov - 1:R] = price

    factor = phi_factor(state.instance, request)
    if math.isfinite(factor):
        T = state.instance.horizon
        for rid, y in state.allocation.items():
            phi = state.phi.setdefault(rid, np.zeros(T))
            mask = (y[:R] > 0) & (phi[:R] == 0)
            phi[:R][mask] = factor * price * y[:R][mask]
    return t_cov, R


def reconsider(state: SchedulerState, request: ChargingRequest, order: list[ChargingRequest],
               position: int) -> dict | None:
    """Try to admit ``request`` by evicting cheaper co-located selections.

    ``order`` is the marginal-value order and ``position`` the request's index
    in it; candidates are scanned from ``position - 1`` down to 0. Returns a
    description of the swap, or None when the state is left unchanged.
    """
    d = request.deadline
    delta = np.minimum(request.max_rate, state.remaining_profile(request))
    slack_before = float(delta.sum())
    v_inc = request.value
    evict = []
    for other in reversed(order[:position]):
        if other.id not in state.allocation or other.station != request.station:
            continue
        if v_inc - other.value > 0:
            evict.append(other)
            v_inc -= other.value
            delta = np.minimum(request.max_rate, delta + state.allocation[other.id][:d])
    if delta.sum() < request.demand - TOL:
        return None
    for other in evict:
        y = state.allocation.pop(other.id)
        state._apply(other, y, -1.0)
        state.alpha.pop(other.id, None)
    y = smart_allocate(state, request)
    return {"removed": [o.id for o in evict], "y": y, "delta": slack_before}


def _touched(y: np.ndarray) -> list[int]:
    return [int(t) + 1 for t in np.flatnonzero(y > 0)]


def repair_alpha(instance: Instance, alpha: dict[int, float], beta: np.ndarray) -> list[int]:
    """Give uncovered requests the smallest alpha that restores dual feasibility.

    Only requests evicted during phase 2 can end up uncovered.
    """
    fixed = []
    for r in instance.requests:
        need = marginal_value(r) - alpha.get(r.id, 0.0) - float(beta[: r.deadline].min())
        if need > TOL:
            alpha[r.id] = alpha.get(r.id, 0.0) + need
            fixed.append(r.id)
    return fixed


def run_scs(instance: Instance, *, ranking: str = FLAT, global_aware: bool = True,
            rerank: bool = False, reconsider_phase: bool = True, engine: str = "scs"):
    """Run both phases and return ``(schedule, certificate, trace)``.

    ``trace`` holds one dict per decision with keys ``phase``, ``request_id``,
    ``decision``, ``slots_touched``, ``revenue_so_far`` and ``engine``.
    """
    problems = validate_instance(instance)
    if problems:
        raise InvalidInstanceError("; ".join(problems))

    state = SchedulerState.empty(instance, ranking=ranking, global_aware=global_aware,
                                 rerank=rerank)
    order = sorted(instance.requests, key=sort_key)
    trace = []

    def log(phase, rid, decision, slots, **extra):
        rec = {"engine": engine, "phase": phase, "request_id": rid, "decision": decision,
               "slots_touched": slots, "revenue_so_far": state.revenue()}
        rec.update(extra)
        trace.append(rec)

    for req in order:
        if feasibility_check(state, req):
            y = smart_allocate(state, req)
            log(1, req.id, "allocated", _touched(y))
        elif state.beta[req.deadline - 1] == 0:
            t_cov, R = beta_cover(state, req)
            log(1, req.id, "covered", list(range(t_cov, R + 1)))
        else:
            log(1, req.id, "rejected", [])

    if reconsider_phase:
        evicted = set()
        for pos, req in enumerate(order):
            if req.id in state.allocation or req.id in evicted:
                continue
            swap = reconsider(state, req, order, pos)
            if swap is None:
                continue
            evicted.update(swap["removed"])
            decision = "swapped" if swap["removed"] else "allocated"
            log(2, req.id, decision, _touched(swap["y"]),
                removed=swap["removed"], delta=swap["delta"])

    alpha = dict(state.alpha)
    repaired = repair_alpha(instance, alpha, state.beta)
    cert = DualCertificate.build(instance, alpha, state.beta.copy(),
                                 phi={k: v.copy() for k, v in state.phi.items()},
                                 repaired=repaired)
    return state.schedule(), cert, trace


def phase_revenue(trace: list[dict], phase: int) -> float:
    """Revenue at the end of ``phase`` as recorded in a trace."""
    last = 0.0
    for rec in trace:
        if rec["phase"] <= phase:
            last = rec["revenue_so_far"]
    return last
