"""Seeded random instances following the experimental setup.

Defaults: one day of 24 hourly slots, 4 stations at 125 kWh each under a
500 kWh global cap, 200 EVs, rate caps 1..20 kWh/slot, slackness 1.5, and
pickup deadlines clustered in the morning, midday and evening windows.

EV values are not part of the published setup. Here each EV pays a unit
price drawn uniformly from [0.5, 1.5] per kWh, so v_i = price * D_i.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .model import ChargingRequest, Instance, Station

DEFAULT_WINDOWS = ((7, 9), (12, 14), (16, 19))


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GenConfig:
    horizon: int = 24
    stations: int = 4
    evs: int = 200
    local_caps: tuple[float, ...] | float = 125.0
    global_cap: float = 500.0
    slackness: float = 1.5
    rate_range: tuple[int, int] = (1, 20)
    windows: tuple[tuple[int, int], ...] = DEFAULT_WINDOWS
    window_weights: tuple[float, ...] | None = None
    price_range: tuple[float, float] = (0.5, 1.5)
    seed: int = 0

    def caps(self) -> tuple[float, ...]:
        if isinstance(self.local_caps, (int, float)):
            return (float(self.local_caps),) * self.stations
        return tuple(float(c) for c in self.local_caps)

    def validate(self) -> None:
        problems = []
        if self.horizon < 1:
            problems.append("horizon must be >= 1")
        if self.stations < 1:
            problems.append("need at least one station")
        if self.evs < 0:
            problems.append("evs must be >= 0")
        if len(self.caps()) != self.stations:
            problems.append(f"{len(self.caps())} local caps for {self.stations} stations")
        if any(c <= 0 for c in self.caps()) or self.global_cap <= 0:
            problems.append("caps must be positive")
        if not self.slackness >= 1:
            problems.append(f"slackness must be >= 1, got {self.slackness}")
        lo, hi = self.rate_range
        if not 1 <= lo <= hi:
            problems.append(f"bad rate range {self.rate_range}")
        plo, phi = self.price_range
        if not 0 < plo <= phi:
            problems.append(f"bad price range {self.price_range}")
        if not self.windows:
            problems.append("need at least one deadline window")
        for a, b in self.windows:
            if not 1 <= a <= b <= self.horizon:
                problems.append(f"window [{a}, {b}] outside horizon 1..{self.horizon}")
        if self.window_weights is not None:
            w = self.window_weights
            if len(w) != len(self.windows) or any(x < 0 for x in w) or sum(w) <= 0:
                problems.append("window weights must be non-negative, one per window")
        if problems:
            raise ConfigError("; ".join(problems))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "GenConfig":
        doc = dict(doc)
        for key in ("rate_range", "price_range", "window_weights"):
            if doc.get(key) is not None:
                doc[key] = tuple(doc[key])
        if "windows" in doc:
            doc["windows"] = tuple(tuple(w) for w in doc["windows"])
        if isinstance(doc.get("local_caps"), list):
            doc["local_caps"] = tuple(doc["local_caps"])
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def with_seed(self, seed: int) -> "GenConfig":
        return replace(self, seed=seed)


def generate_instance(config: GenConfig) -> Instance:
    config.validate()
    rng = np.random.default_rng(config.seed)
    n, s = config.evs, config.slackness

    weights = np.ones(len(config.windows)) if config.window_weights is None \
        else np.asarray(config.window_weights, dtype=float)
    stations = rng.integers(1, config.stations + 1, size=n)
    which = rng.choice(len(config.windows), size=n, p=weights / weights.sum())
    lo = np.array([config.windows[w][0] for w in which])
    hi = np.array([config.windows[w][1] for w in which])
    deadlines = rng.integers(lo, hi + 1)
    rates = rng.integers(config.rate_range[0], config.rate_range[1] + 1, size=n).astype(float)
    top = rates * deadlines / s
    bottom = np.minimum(rates, top)
    demands = rng.uniform(bottom, top)
    prices = rng.uniform(*config.price_range, size=n)

    requests = tuple(
        ChargingRequest(
            id=i + 1,
            station=int(stations[i]),
            demand=float(demands[i]),
            deadline=int(deadlines[i]),
            max_rate=float(rates[i]),
            value=float(prices[i] * demands[i]),
        )
        for i in range(n)
    )
    return Instance(
        horizon=config.horizon,
        stations=tuple(Station(c) for c in config.caps()),
        global_cap=float(config.global_cap),
        slackness=float(s),
        requests=requests,
        seed=config.seed,
    )


def scaled_default(**overrides) -> GenConfig:
    """Desk-scale variant of the defaults: 60 EVs, 40 kWh stations, 160 kWh global cap."""
    base = dict(evs=60, local_caps=40.0, global_cap=160.0)
    base.update(overrides)
    return GenConfig(**base)


@dataclass(frozen=True)
class SmallConfig:
    """Parameters for tiny instances that exact oracles can handle."""

    max_evs: int = 10
    min_evs: int = 4
    max_horizon: int = 6
    min_horizon: int = 3
    stations: int = 2
    slackness: float = 1.5
    rate_range: tuple[int, int] = (1, 4)
    cap_margin: tuple[float, float] = (1.0, 6.0)
    extra: dict = field(default_factory=dict)


def small_instance(seed: int, config: SmallConfig = SmallConfig()) -> Instance:
    """Random tiny instance with C_j > K_j and a global cap that can bind."""
    rng = np.random.default_rng(10_000 + seed)
    T = int(rng.integers(config.min_horizon, config.max_horizon + 1))
    n = int(rng.integers(config.min_evs, config.max_evs + 1))
    kmax = config.rate_range[1]
    caps = tuple(float(kmax + rng.uniform(*config.cap_margin)) for _ in range(config.stations))
    global_cap = float(rng.uniform(max(caps), sum(caps)))
    cfg = GenConfig(
        horizon=T,
        stations=config.stations,
        evs=n,
        local_caps=caps,
        global_cap=global_cap,
        slackness=config.slackness,
        rate_range=config.rate_range,
        windows=((1, T),),
        seed=seed,
        **config.extra,
    )
    return generate_instance(cfg)
