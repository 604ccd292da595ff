"""Exact ground truth for small instances.

Feasibility of a fixed selection reduces to a max-flow problem

    source -> request i        (D_i)
    request i -> (P(i), t)     (k_i, for t <= d_i)
    (j, t) -> slot t           (C_j)
    slot t -> sink             (C_total, or a trial peak)

which is decided on integer capacities (1e-6 kWh resolution) with scipy's
Dinic implementation; witness schedules come from a second pass on the exact
real capacities. Optimal revenue comes from subset enumeration on top.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_array
from scipy.sparse.csgraph import maximum_flow

from .model import TOL, Instance, Schedule

RESOLUTION = 1e-6
_INT_MAX = 2**31 - 1
DEFAULT_LIMIT = 16


class InstanceTooLargeError(ValueError):
    pass


@dataclass
class FlowNetwork:
    """Node layout: 0 source, then requests, then (station, slot), then slots, then sink."""

    instance: Instance
    subset: tuple[int, ...]
    scale: float
    rows: list[int]
    cols: list[int]
    caps: list[int]
    n_nodes: int
    float_caps: list[float] = field(default_factory=list)

    @property
    def sink(self) -> int:
        return self.n_nodes - 1

    def station_slot_node(self, j: int, t: int) -> int:
        T = self.instance.horizon
        return 1 + len(self.subset) + (j - 1) * T + (t - 1)

    def slot_node(self, t: int) -> int:
        return 1 + len(self.subset) + self.instance.m * self.instance.horizon + (t - 1)

    def demand_units(self) -> int:
        inst = self.instance
        return sum(self._units(inst.request(rid).demand) for rid in self.subset)

    def _units(self, x: float) -> int:
        return int(round(x * self.scale))


def _scale_for(instance: Instance, peak: float | None = None) -> float:
    biggest = max([instance.global_cap, *(s.cap for s in instance.stations),
                   *(r.demand for r in instance.requests), *(r.max_rate for r in instance.requests),
                   peak or 0.0])
    scale = 1.0 / RESOLUTION
    while biggest * scale > _INT_MAX // 2:
        scale /= 10
    return scale


def build_network(instance: Instance, subset, peak: float | None = None) -> FlowNetwork:
    subset = tuple(sorted(subset))
    T, m = instance.horizon, instance.m
    n_nodes = 1 + len(subset) + m * T + T + 1
    scale = _scale_for(instance, peak)
    net = FlowNetwork(instance, subset, scale, [], [], [], n_nodes)

    def edge(u, v, cap):
        net.rows.append(u)
        net.cols.append(v)
        net.caps.append(net._units(cap))
        net.float_caps.append(float(cap))

    for pos, rid in enumerate(subset, start=1):
        r = instance.request(rid)
        edge(0, pos, r.demand)
        for t in range(1, r.deadline + 1):
            edge(pos, net.station_slot_node(r.station, t), r.max_rate)
    for j, st in enumerate(instance.stations, start=1):
        for t in range(1, T + 1):
            edge(net.station_slot_node(j, t), net.slot_node(t), st.cap)
    sink_cap = instance.global_cap if peak is None else min(peak, instance.global_cap)
    for t in range(1, T + 1):
        edge(net.slot_node(t), net.sink, sink_cap)
    return net


def _solve(net: FlowNetwork):
    graph = coo_array((np.array(net.caps, dtype=np.int32), (net.rows, net.cols)),
                      shape=(net.n_nodes, net.n_nodes)).tocsr()
    graph.sum_duplicates()
    return maximum_flow(graph, 0, net.sink)


def _flow_is_complete(net: FlowNetwork, value: int) -> bool:
    # rounding each demand to the grid can cost at most one unit per request
    return value >= net.demand_units() - len(net.subset)


def _float_max_flow(cap: np.ndarray, source: int, sink: int) -> np.ndarray:
    """Edmonds-Karp on real capacities; the path count bound does not depend on them."""
    flow = np.zeros_like(cap)
    n = cap.shape[0]
    while True:
        parent = np.full(n, -1)
        parent[source] = source
        queue = deque([source])
        while queue and parent[sink] < 0:
            u = queue.popleft()
            for v in np.flatnonzero(cap[u] - flow[u] > 1e-15):
                if parent[v] < 0:
                    parent[v] = u
                    queue.append(v)
        if parent[sink] < 0:
            return flow
        path, v = [], sink
        while v != source:
            path.append((parent[v], v))
            v = parent[v]
        push = min(cap[u, v] - flow[u, v] for u, v in path)
        for u, v in path:
            flow[u, v] += push
            flow[v, u] -= push


def _witness(net: FlowNetwork) -> Schedule:
    inst = net.instance
    T = inst.horizon
    cap = np.zeros((net.n_nodes, net.n_nodes))
    for u, v, c in zip(net.rows, net.cols, net.float_caps):
        cap[u, v] += c
    flow = _float_max_flow(cap, 0, net.sink)
    alloc = {}
    for pos, rid in enumerate(net.subset, start=1):
        r = inst.request(rid)
        y = np.zeros(T)
        for t in range(1, r.deadline + 1):
            y[t - 1] = max(flow[pos, net.station_slot_node(r.station, t)], 0.0)
        alloc[rid] = np.minimum(y, r.max_rate)
    _repair(inst, alloc)
    return Schedule(T, alloc, frozenset(net.subset))


def _repair(inst: Instance, alloc: dict[int, np.ndarray]) -> None:
    """Snap float-noise profiles onto the exact demands."""
    T = inst.horizon
    local = np.zeros((T, inst.m))
    for rid, y in alloc.items():
        local[:, inst.request(rid).station - 1] += y
    for rid, y in alloc.items():
        r = inst.request(rid)
        gap = r.demand - y.sum()
        if gap < 0:
            for t in np.argsort(-y, kind="stable"):
                cut = min(-gap, y[t])
                y[t] -= cut
                local[t, r.station - 1] -= cut
                gap += cut
                if gap >= 0:
                    break
        elif gap > 0:
            total = local.sum(axis=1)
            for t in range(r.deadline):
                room = min(r.max_rate - y[t],
                           inst.stations[r.station - 1].cap - local[t, r.station - 1],
                           inst.global_cap - total[t])
                add = min(max(room, 0.0), gap)
                y[t] += add
                local[t, r.station - 1] += add
                total[t] += add
                gap -= add
                if gap <= 0:
                    break


def max_flow_feasible(instance: Instance, subset) -> tuple[bool, Schedule | None]:
    """Whether exactly ``subset`` can be fully charged, with a witness schedule if so."""
    subset = tuple(sorted(subset))
    if not subset:
        return True, Schedule(instance.horizon, {}, frozenset())
    net = build_network(instance, subset)
    res = _solve(net)
    if not _flow_is_complete(net, int(res.flow_value)):
        return False, None
    return True, _witness(net)


def is_feasible(instance: Instance, subset, peak: float | None = None) -> bool:
    if not subset:
        return True
    net = build_network(instance, subset, peak)
    return _flow_is_complete(net, int(_solve(net).flow_value))


def _check_size(instance: Instance, limit: int) -> None:
    if instance.n > limit:
        raise InstanceTooLargeError(f"{instance.n} requests exceeds the enumeration limit {limit}")


def _better(value, subset, best_value, best_subset) -> bool:
    if value > best_value + TOL:
        return True
    return abs(value - best_value) <= TOL and subset < best_subset


def exhaustive_opt(instance: Instance, *, limit: int = DEFAULT_LIMIT,
                   reverse: bool = False) -> tuple[float, tuple[int, ...]]:
    """Plain scan over every subset mask, no pruning."""
    _check_size(instance, limit)
    reqs = sorted(instance.requests, key=lambda r: r.id)
    n = len(reqs)
    masks = range(2**n - 1, -1, -1) if reverse else range(2**n)
    best_value, best_subset = 0.0, ()
    for mask in masks:
        subset = tuple(r.id for b, r in enumerate(reqs) if mask >> b & 1)
        value = float(sum(r.value for b, r in enumerate(reqs) if mask >> b & 1))
        if _better(value, subset, best_value, best_subset) and is_feasible(instance, subset):
            best_value, best_subset = value, subset
    return best_value, best_subset


def _search(instance: Instance, collect_all: bool):
    reqs = sorted(instance.requests, key=lambda r: r.id)
    suffix = np.concatenate([np.cumsum([r.value for r in reqs][::-1])[::-1], [0.0]])
    best = [0.0, ()]
    found = []

    def visit(k, chosen, value):
        if value + suffix[k] < best[0] - TOL:
            return
        if k == len(reqs):
            subset = tuple(chosen)
            if collect_all:
                found.append((value, subset))
            if _better(value, subset, best[0], best[1]):
                best[0], best[1] = value, subset
            return
        r = reqs[k]
        # supersets of an infeasible selection stay infeasible
        if is_feasible(instance, chosen + [r.id]):
            visit(k + 1, chosen + [r.id], value + r.value)
        visit(k + 1, chosen, value)

    visit(0, [], 0.0)
    return best[0], best[1], found


def brute_force_opt(instance: Instance, *, limit: int = DEFAULT_LIMIT) -> tuple[float, tuple[int, ...]]:
    """Exact optimal revenue with branch-and-bound; ties go to the lexicographically smallest subset."""
    _check_size(instance, limit)
    value, subset, _ = _search(instance, collect_all=False)
    return value, subset


def optimal_subsets(instance: Instance, *, limit: int = DEFAULT_LIMIT) -> list[tuple[int, ...]]:
    _check_size(instance, limit)
    best, _, found = _search(instance, collect_all=True)
    return sorted(s for v, s in found if v >= best - TOL)


def min_peak(instance: Instance, subset) -> float:
    """Smallest global peak at which ``subset`` stays schedulable (bisection on the sink caps)."""
    if not subset:
        return 0.0
    lo, hi = 0.0, instance.global_cap
    if not is_feasible(instance, subset, hi):
        raise ValueError(f"subset {tuple(subset)} is not feasible")
    eps = 1e-6 * instance.global_cap
    while hi - lo > eps:
        mid = 0.5 * (lo + hi)
        if is_feasible(instance, subset, mid):
            hi = mid
        else:
            lo = mid
    return hi


def min_peak_among_optimal(instance: Instance, *, limit: int = DEFAULT_LIMIT) -> float:
    """Pseudo-optimal peak: lowest achievable peak over all revenue-optimal selections."""
    return min(min_peak(instance, s) for s in optimal_subsets(instance, limit=limit))
