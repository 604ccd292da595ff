"""Domain types for multi-station EV charging.

Energies are kWh, slots are 1-based, and every array indexed by slot stores
slot ``t`` at position ``t - 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TOL = 1e-9
FORMAT_VERSION = 1


class InvalidInstanceError(ValueError):
    """Raised when an instance fails validation."""


class UnboundedRatioError(ValueError):
    """Raised when the approximation bound is infinite for an instance."""


@dataclass(frozen=True)
class ChargingRequest:
    id: int
    station: int
    demand: float
    deadline: int
    max_rate: float
    value: float


@dataclass(frozen=True)
class Station:
    cap: float


@dataclass(frozen=True)
class Instance:
    horizon: int
    stations: tuple[Station, ...]
    global_cap: float
    slackness: float
    requests: tuple[ChargingRequest, ...]
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "stations", tuple(self.stations))
        object.__setattr__(self, "requests", tuple(self.requests))

    @property
    def n(self) -> int:
        return len(self.requests)

    @property
    def m(self) -> int:
        return len(self.stations)

    @property
    def station_caps(self) -> np.ndarray:
        return np.array([s.cap for s in self.stations], dtype=float)

    def request(self, rid: int) -> ChargingRequest:
        return self._by_id[rid]

    @property
    def _by_id(self) -> dict[int, ChargingRequest]:
        cache = self.__dict__.get("_id_cache")
        if cache is None:
            cache = {r.id: r for r in self.requests}
            object.__setattr__(self, "_id_cache", cache)
        return cache

    def max_rates(self) -> dict[int, float]:
        """K_j per station: the largest rate cap among its requests (0 if empty)."""
        out = {j: 0.0 for j in range(1, self.m + 1)}
        for r in self.requests:
            if r.station in out:
                out[r.station] = max(out[r.station], r.max_rate)
        return out

    def populated_stations(self) -> list[int]:
        return sorted({r.station for r in self.requests})

    def total_value(self) -> float:
        return math.fsum(r.value for r in self.requests)

    def with_requests(self, requests) -> "Instance":
        return Instance(self.horizon, self.stations, self.global_cap,
                        self.slackness, tuple(requests), self.seed)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        doc = {
            "version": FORMAT_VERSION,
            "horizon": self.horizon,
            "global_cap": self.global_cap,
            "slackness": self.slackness,
            "stations": [{"cap": s.cap} for s in self.stations],
            "requests": [
                {"id": r.id, "station": r.station, "demand": r.demand,
                 "deadline": r.deadline, "max_rate": r.max_rate, "value": r.value}
                for r in self.requests
            ],
        }
        if self.seed is not None:
            doc["seed"] = self.seed
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "Instance":
        try:
            version = doc.get("version", FORMAT_VERSION)
            if version != FORMAT_VERSION:
                raise InvalidInstanceError(f"unsupported instance version {version!r}")
            requests = tuple(
                ChargingRequest(
                    id=int(r["id"]),
                    station=int(r["station"]),
                    demand=float(r["demand"]),
                    deadline=int(r["deadline"]),
                    max_rate=float(r["max_rate"]),
                    value=float(r["value"]),
                )
                for r in doc["requests"]
            )
            return cls(
                horizon=int(doc["horizon"]),
                stations=tuple(Station(float(s["cap"])) for s in doc["stations"]),
                global_cap=float(doc["global_cap"]),
                slackness=float(doc["slackness"]),
                requests=requests,
                seed=doc.get("seed"),
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise InvalidInstanceError(f"malformed instance document: {exc!r}") from exc

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInstanceError(f"instance is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)


def load_instance(path) -> Instance:
    return Instance.from_json(Path(path).read_text(encoding="utf-8"))


def save_instance(instance: Instance, path) -> None:
    Path(path).write_text(instance.to_json(), encoding="utf-8")


@dataclass
class Schedule:
    """Per-request energy profiles plus the selected set.

    ``allocation[rid]`` is a length-T array; requests absent from the map
    receive nothing.
    """

    horizon: int
    allocation: dict[int, np.ndarray] = field(default_factory=dict)
    selected: frozenset[int] = frozenset()

    def energy(self, rid: int) -> np.ndarray:
        y = self.allocation.get(rid)
        return np.zeros(self.horizon) if y is None else y

    def load_profile(self, instance: Instance, station: int | None = None) -> np.ndarray:
        total = np.zeros(self.horizon)
        for r in sorted(instance.requests, key=lambda r: r.id):
            if station is None or r.station == station:
                y = self.allocation.get(r.id)
                if y is not None:
                    total += y
        return total

    def revenue(self, instance: Instance) -> float:
        return math.fsum(instance.request(rid).value for rid in self.selected)

    def matrix(self, instance: Instance) -> np.ndarray:
        """Dense (n, T) allocation in instance request order."""
        return np.array([self.energy(r.id) for r in instance.requests]).reshape(instance.n, self.horizon)


@dataclass
class DualCertificate:
    """Dual point (alpha, beta, gamma, pi) plus the analysis-only Phi values.

    ``beta`` is a single slot-indexed price shared by every station, so its
    objective coefficient is the sum of the local caps.
    """

    alpha: dict[int, float]
    beta: np.ndarray
    gamma: np.ndarray
    pi: dict[int, np.ndarray]
    dual_objective: float
    phi: dict[int, np.ndarray] = field(default_factory=dict)
    repaired: tuple[int, ...] = ()

    @classmethod
    def build(cls, instance: Instance, alpha, beta, gamma=None, pi=None, phi=None,
              repaired=()) -> "DualCertificate":
        T = instance.horizon
        beta = np.asarray(beta, dtype=float)
        gamma = np.zeros(T) if gamma is None else np.asarray(gamma, dtype=float)
        if pi is None:
            pi = {r.id: np.zeros(T) for r in instance.requests}
        alpha = {r.id: float(alpha.get(r.id, 0.0)) for r in instance.requests}
        cert = cls(alpha, beta, gamma, pi, 0.0, dict(phi or {}), tuple(repaired))
        cert.dual_objective = cert.objective(instance)
        return cert

    def objective(self, instance: Instance) -> float:
        """Recompute the dual objective from the stored variables."""
        alpha_part = sum(r.demand * self.alpha.get(r.id, 0.0) for r in instance.requests)
        beta_part = float(instance.station_caps.sum() * self.beta.sum())
        gamma_part = float(instance.global_cap * self.gamma.sum())
        return float(alpha_part + beta_part + gamma_part)


def validate_instance(instance: Instance) -> list[str]:
    """Return one message per violated instance or request invariant."""
    problems = []
    if instance.horizon < 1:
        problems.append(f"horizon must be >= 1, got {instance.horizon}")
    if not instance.global_cap > 0:
        problems.append(f"global_cap must be > 0, got {instance.global_cap}")
    if not instance.slackness >= 1:
        problems.append(f"slackness must be >= 1, got {instance.slackness}")
    for j, st in enumerate(instance.stations, start=1):
        if not st.cap > 0:
            problems.append(f"station {j}: cap must be > 0, got {st.cap}")
    seen = set()
    for r in instance.requests:
        tag = f"request {r.id}"
        if r.id in seen:
            problems.append(f"{tag}: duplicate id")
        seen.add(r.id)
        if not 1 <= r.station <= instance.m:
            problems.append(f"{tag}: invalid station {r.station} (instance has {instance.m})")
        if not 1 <= r.deadline <= instance.horizon:
            problems.append(f"{tag}: deadline {r.deadline} outside [1, {instance.horizon}]")
        if not r.demand > 0:
            problems.append(f"{tag}: demand must be > 0, got {r.demand}")
        if not r.max_rate > 0:
            problems.append(f"{tag}: max_rate must be > 0, got {r.max_rate}")
        if not r.value > 0:
            problems.append(f"{tag}: value must be > 0, got {r.value}")
        if r.max_rate > 0 and instance.slackness > 0 and r.deadline >= 1:
            limit = r.max_rate * r.deadline / instance.slackness
            if r.demand > limit + TOL:
                problems.append(
                    f"{tag}: fails D <= k*d/s ({r.demand:g} > {limit:.6g})")
    return problems


def bound_finite(instance: Instance) -> list[int]:
    """Populated stations whose K_j >= C_j (the bound is infinite there)."""
    K = instance.max_rates()
    return [j for j in instance.populated_stations()
            if 1 <= j <= instance.m and K[j] >= instance.stations[j - 1].cap]


def marginal_value(request: ChargingRequest) -> float:
    if request.demand == 0:
        raise ZeroDivisionError(f"request {request.id} has zero demand")
    return request.value / request.demand


def sort_key(request: ChargingRequest):
    # non-increasing marginal value, ties by smaller id
    return (-marginal_value(request), request.id)


def approximation_bound(instance: Instance) -> float:
    s = instance.slackness
    if s <= 1:
        raise UnboundedRatioError(f"bound undefined for slackness {s}")
    K = instance.max_rates()
    total = 0.0
    for j in instance.populated_stations():
        C = instance.stations[j - 1].cap
        if K[j] >= C:
            raise UnboundedRatioError(f"station {j}: K_j={K[j]:g} >= C_j={C:g}")
        total += C / (C - K[j])
    return 1.0 + total * s / (s - 1)


def try_approximation_bound(instance: Instance) -> float:
    try:
        return approximation_bound(instance)
    except UnboundedRatioError:
        return math.inf
