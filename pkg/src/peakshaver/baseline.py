"""GreedyRTL comparison engine: each station scheduled on its own, latest slots first."""

from __future__ import annotations

from dataclasses import replace

from .metrics import MetricsReport, compute_metrics
from .model import TOL, Instance, InvalidInstanceError, Schedule, validate_instance
from .scheduler import RTL, run_scs


class PreconditionError(ValueError):
    """Raised when the local caps do not fit under the global cap."""


def station_instance(instance: Instance, j: int) -> Instance:
    """Single-station sub-instance; the station cap doubles as the global cap."""
    cap = instance.stations[j - 1].cap
    reqs = [r for r in instance.requests if r.station == j]
    sub = Instance(instance.horizon, (instance.stations[j - 1],), cap,
                   instance.slackness, (), instance.seed)
    return sub.with_requests(replace(r, station=1) for r in reqs)


def run_greedy_rtl(instance: Instance, *, reconsider: bool = True,
                   return_trace: bool = False):
    """Return ``(schedule, metrics)`` (plus the trace when asked)."""
    problems = validate_instance(instance)
    if problems:
        raise InvalidInstanceError("; ".join(problems))
    local_sum = float(instance.station_caps.sum())
    if local_sum > instance.global_cap + TOL:
        raise PreconditionError(
            f"GreedyRTL needs sum of local caps <= global cap ({local_sum:g} > {instance.global_cap:g})")

    allocation, selected, trace = {}, set(), []
    for j in range(1, instance.m + 1):
        sub = station_instance(instance, j)
        if not sub.requests:
            continue
        sched, _, sub_trace = run_scs(sub, ranking=RTL, global_aware=False,
                                      reconsider_phase=reconsider, engine="greedy-rtl")
        allocation.update(sched.allocation)
        selected |= sched.selected
        for rec in sub_trace:
            trace.append(dict(rec, station=j))

    schedule = Schedule(instance.horizon, allocation, frozenset(selected))
    report: MetricsReport = compute_metrics(instance, schedule)
    if return_trace:
        return schedule, report, trace
    return schedule, report
