"""KPIs and certificate checks for (instance, schedule, certificate) triples."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .model import (
    TOL,
    DualCertificate,
    Instance,
    Schedule,
    UnboundedRatioError,
    approximation_bound,
    marginal_value,
)


@dataclass(frozen=True)
class MetricsReport:
    revenue: float
    normalized_revenue: float
    utilization: float
    acceptance_rate: float
    actual_peak: float
    per_station_peaks: tuple[float, ...]


@dataclass(frozen=True)
class Violation:
    constraint: str
    index: tuple
    slack: float

    def __str__(self):
        return f"{self.constraint} at {self.index}: slack {self.slack:.3g}"


@dataclass
class BoundReport:
    dual_objective: float
    alpha_bound: float
    scaled_revenue: float
    bound_ok: bool
    station_charge_ok: dict[int, bool] | None = None
    weak_duality_ok: bool | None = None
    ratio_to_opt: float | None = None

    @property
    def passed(self) -> bool:
        checks = [self.bound_ok]
        if self.weak_duality_ok is not None:
            checks.append(self.weak_duality_ok)
        return all(checks)


def compute_metrics(instance: Instance, schedule: Schedule) -> MetricsReport:
    n = instance.n
    S = [instance.request(rid) for rid in sorted(schedule.selected)]
    revenue = math.fsum(r.value for r in S)
    total_value = instance.total_value()
    load = schedule.load_profile(instance)
    peaks = tuple(float(schedule.load_profile(instance, j).max(initial=0.0))
                  for j in range(1, instance.m + 1))
    return MetricsReport(
        revenue=revenue,
        normalized_revenue=revenue / total_value if total_value > 0 else 0.0,
        utilization=math.fsum(r.demand for r in S) / (instance.horizon * instance.global_cap),
        acceptance_rate=len(S) / n if n else 0.0,
        actual_peak=float(load.max(initial=0.0)),
        per_station_peaks=peaks,
    )


def verify_primal_feasibility(instance: Instance, schedule: Schedule) -> list[Violation]:
    out = []
    T = instance.horizon
    ids = {r.id for r in instance.requests}
    for rid in schedule.allocation:
        if rid not in ids:
            out.append(Violation("unknown request", (rid,), -math.inf))
    for rid in schedule.selected:
        if rid not in ids:
            out.append(Violation("unknown selection", (rid,), -math.inf))

    for r in instance.requests:
        y = schedule.energy(r.id)
        if y.shape != (T,):
            out.append(Violation("profile length", (r.id,), float(len(y) - T)))
            continue
        for t in range(1, T + 1):
            e = y[t - 1]
            if e < -TOL:
                out.append(Violation("non-negativity", (r.id, t), float(e)))
            if t > r.deadline and e > TOL:
                out.append(Violation("deadline", (r.id, t), float(-e)))
            if e > r.max_rate + TOL:
                out.append(Violation("rate", (r.id, t), float(r.max_rate - e)))
        target = r.demand if r.id in schedule.selected else 0.0
        total = float(y.sum())
        if abs(total - target) > TOL:
            out.append(Violation("all-or-nothing", (r.id,), target - total))

    for j, st in enumerate(instance.stations, start=1):
        load = schedule.load_profile(instance, j)
        for t in np.flatnonzero(load > st.cap + TOL):
            out.append(Violation("local cap", (j, int(t) + 1), float(st.cap - load[t])))
    total = schedule.load_profile(instance)
    for t in np.flatnonzero(total > instance.global_cap + TOL):
        out.append(Violation("global cap", (int(t) + 1,), float(instance.global_cap - total[t])))
    return out


def verify_dual_feasibility(instance: Instance, cert: DualCertificate) -> list[Violation]:
    out = []
    checks = [("alpha", rid, v) for rid, v in cert.alpha.items()]
    checks += [("beta", t + 1, v) for t, v in enumerate(cert.beta)]
    checks += [("gamma", t + 1, v) for t, v in enumerate(cert.gamma)]
    for name, idx, v in checks:
        if v < -TOL:
            out.append(Violation(f"{name} >= 0", (idx,), float(v)))
    for r in instance.requests:
        pi = cert.pi.get(r.id)
        if pi is None:
            pi = np.zeros(instance.horizon)
        if (pi < -TOL).any():
            out.append(Violation("pi >= 0", (r.id,), float(pi.min())))
        pi_window = r.max_rate / r.demand * float(pi[: r.deadline].sum())
        need = marginal_value(r)
        for t in range(1, r.deadline + 1):
            lhs = (cert.alpha.get(r.id, 0.0) + cert.beta[t - 1] + cert.gamma[t - 1]
                   + pi[t - 1] - pi_window)
            if lhs < need - TOL:
                out.append(Violation("dual cover", (r.id, t), float(lhs - need)))
    return out


def verify_bound(instance: Instance, schedule: Schedule, cert: DualCertificate,
                 opt: float | None = None) -> BoundReport:
    """Check the dual objective against the approximation guarantee.

    Raises UnboundedRatioError when the bound is undefined (s <= 1 or a
    populated station with K_j >= C_j).
    """
    alpha = approximation_bound(instance)
    revenue = schedule.revenue(instance)
    lam = cert.objective(instance)
    scale = max(1.0, abs(lam))
    report = BoundReport(
        dual_objective=lam,
        alpha_bound=alpha,
        scaled_revenue=alpha * revenue,
        bound_ok=lam <= alpha * revenue + TOL * scale,
    )
    if cert.phi:
        charged = {j: 0.0 for j in range(1, instance.m + 1)}
        for rid in schedule.selected:
            r = instance.request(rid)
            phi = cert.phi.get(rid)
            if phi is not None:
                charged[r.station] += float(phi[: r.deadline].sum())
        beta_mass = float(cert.beta.sum())
        report.station_charge_ok = {
            j: instance.stations[j - 1].cap * beta_mass <= charged[j] + TOL * scale
            for j in instance.populated_stations()
        }
    if opt is not None:
        report.weak_duality_ok = lam >= opt - TOL * max(1.0, abs(opt))
        report.ratio_to_opt = revenue / opt if opt > 0 else 1.0
    return report


CSV_FIXED = ["instance_id", "engine", "revenue", "normalized_revenue", "utilization",
             "acceptance_rate", "actual_peak"]
CSV_TAIL = ["alpha_bound", "dual_objective", "opt_revenue", "ratio_to_opt"]


def csv_columns(m: int) -> list[str]:
    return CSV_FIXED + [f"peak_station_{j}" for j in range(1, m + 1)] + CSV_TAIL


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if not math.isfinite(x):
            return ""
        return repr(x)
    return str(x)


def csv_row(instance_id, engine: str, report: MetricsReport, *, alpha_bound=None,
            dual_objective=None, opt_revenue=None) -> dict[str, str]:
    ratio = None
    if opt_revenue is not None:
        ratio = report.revenue / opt_revenue if opt_revenue > 0 else 1.0
    row = {
        "instance_id": str(instance_id),
        "engine": engine,
        "revenue": _fmt(report.revenue),
        "normalized_revenue": _fmt(report.normalized_revenue),
        "utilization": _fmt(report.utilization),
        "acceptance_rate": _fmt(report.acceptance_rate),
        "actual_peak": _fmt(report.actual_peak),
    }
    for j, p in enumerate(report.per_station_peaks, start=1):
        row[f"peak_station_{j}"] = _fmt(p)
    row["alpha_bound"] = _fmt(alpha_bound)
    row["dual_objective"] = _fmt(dual_objective)
    row["opt_revenue"] = _fmt(opt_revenue)
    row["ratio_to_opt"] = _fmt(ratio)
    return row


def bound_or_none(instance: Instance) -> float | None:
    try:
        return approximation_bound(instance)
    except UnboundedRatioError:
        return None


def format_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()
