import json

import numpy as np
import pytest

from peakshaver.gen import ConfigError, GenConfig, generate_instance, scaled_default
from peakshaver.model import validate_instance


def test_defaults_match_setup():
    cfg = GenConfig()
    assert (cfg.horizon, cfg.stations, cfg.evs) == (24, 4, 200)
    assert cfg.caps() == (125.0,) * 4 and cfg.global_cap == 500.0
    assert cfg.slackness == 1.5 and cfg.rate_range == (1, 20)
    inst = generate_instance(cfg.with_seed(7))
    assert validate_instance(inst) == []
    assert (inst.n, inst.m, inst.horizon) == (200, 4, 24)


def test_degenerate_window():
    cfg = GenConfig(evs=300, windows=((5, 5),), slackness=1.0, rate_range=(2, 2), seed=3)
    inst = generate_instance(cfg)
    assert {r.deadline for r in inst.requests} == {5}
    assert all(2 <= r.demand <= 10 for r in inst.requests)


def test_same_seed_same_bytes():
    a = generate_instance(GenConfig(seed=11)).to_json()
    b = generate_instance(GenConfig(seed=11)).to_json()
    assert a == b
    assert a != generate_instance(GenConfig(seed=12)).to_json()
    assert '"seed": 11' in a


def test_ten_thousand_requests_respect_slackness_and_windows():
    cfg = GenConfig(evs=10_000, seed=5)
    inst = generate_instance(cfg)
    allowed = {t for a, b in cfg.windows for t in range(a, b + 1)}
    assert all(r.demand <= r.max_rate * r.deadline / cfg.slackness for r in inst.requests)
    assert all(r.deadline in allowed for r in inst.requests)
    rates = np.array([r.max_rate for r in inst.requests])
    assert rates.min() == 1 and rates.max() == 20
    unit_prices = np.array([r.value / r.demand for r in inst.requests])
    assert 0.5 <= unit_prices.min() and unit_prices.max() <= 1.5


def test_window_weights_respected():
    cfg = GenConfig(evs=2000, windows=((2, 3), (10, 11)), window_weights=(0.0, 1.0), seed=2)
    assert {r.deadline for r in generate_instance(cfg).requests} <= {10, 11}


@pytest.mark.parametrize("bad", [
    dict(slackness=0.5),
    dict(windows=((20, 30),)),
    dict(rate_range=(5, 2)),
    dict(local_caps=(1.0, 2.0)),
    dict(window_weights=(1.0,)),
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        generate_instance(GenConfig(**bad))


def test_scaled_default():
    cfg = scaled_default(seed=1)
    assert (cfg.evs, cfg.caps(), cfg.global_cap) == (60, (40.0,) * 4, 160.0)


def test_config_round_trip():
    cfg = GenConfig(evs=5, local_caps=(1.0, 2.0, 3.0, 4.0), window_weights=(1, 2, 3))
    assert GenConfig.from_dict(json.loads(cfg.to_json())) == cfg
