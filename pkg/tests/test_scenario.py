import json
import math

import numpy as np
import pytest

from rfisst.core import Hypothesis, Track
from rfisst.runner import RunConfig, run_tracker
from rfisst.scenario import (
    ScenarioConfig,
    ScenarioError,
    birth_death_config,
    bundled_scenario,
    classify_estimates,
    generate_scenario,
    tracker_models,
)


def _small(**kw):
    base = dict(name="t", object_count=3, orbit_radius_km=[20000.0, 30000.0], start_in_fov=True,
                total_scans=5, sensor={"pD": 1.0, "clutter_rate": 0.0})
    base.update(kw)
    return ScenarioConfig.from_dict(base)


def test_fifteen_objects_all_known():
    cfg = ScenarioConfig.load(bundled_scenario("fifteen.json"))
    sc = generate_scenario(cfg)
    assert len(sc.initial_forest) == 1 and len(sc.initial_forest.hypotheses[0].tracks) == 15
    assert len(sc.measurements) == cfg.total_scans


def test_fifty_objects_with_five_births():
    cfg = ScenarioConfig.load(bundled_scenario("fifty_bd.json"))
    assert cfg.n_known == 45 and len(cfg.birth_schedule) == 5
    sc = generate_scenario(cfg)
    assert len(sc.initial_forest.hypotheses[0].tracks) == 45
    assert len(sc.truth.states[-1]) == 50


def test_generation_is_seed_deterministic():
    cfg = _small()
    a, b = generate_scenario(cfg, 3), generate_scenario(cfg, 3)
    for x, y in zip(a.measurements, b.measurements):
        np.testing.assert_array_equal(x, y)
    c = generate_scenario(cfg, 4)
    assert not np.array_equal(a.measurements[0], c.measurements[0])


def test_measurements_follow_origins():
    sc = generate_scenario(_small(), 1)
    for k, (zs, org) in enumerate(zip(sc.measurements, sc.origins), start=1):
        for z, o in zip(zs, org):
            assert np.linalg.norm(z - sc.truth.states[k][o][:2]) < 6.0


def test_scheduled_birth_and_death():
    cfg = _small(object_count=4, birth_schedule=[{"scan": 2, "state": "random_in_fov"}],
                 death_schedule=[{"scan": 4, "object": 0}])
    sc = generate_scenario(cfg, 0)
    assert 3 not in sc.truth.states[1] and 3 in sc.truth.states[2]
    assert 0 in sc.truth.states[3] and 0 not in sc.truth.states[4]
    assert sc.truth.alive[0] == (0, 3) and sc.truth.alive[3] == (2, 5)


@pytest.mark.parametrize("bad", [
    {"total_scans": 0},
    {"object_count": 1, "birth_schedule": [{"scan": 1}, {"scan": 2}]},
    {"orbit_radius_km": [5000.0, 9000.0]},
    {"start_in_fov": False},
    {"initial_known": 9},
    {"tracker": {"H_inf": 0}},
    {"birth_schedule": [{"scan": 99}]},
    {"death_schedule": [{"scan": 1}]},
    {"colour": "red"},
    {"sensor": {"pD": 2.0}},
])
def test_invalid_configs_are_rejected(bad):
    with pytest.raises((ScenarioError, ValueError)):
        _small(**bad)


def test_config_round_trip(tmp_path):
    cfg = _small()
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert ScenarioConfig.load(p) == cfg


def test_tracker_setup():
    cfg = ScenarioConfig.load(bundled_scenario("desk_births.json"))
    sensor = cfg.sensor.build()
    models = tracker_models(cfg, sensor)
    assert math.isclose(models.clutter_logdensity, -math.log(sensor.area))
    bd = birth_death_config(cfg, sensor)
    assert bd.alpha == 0.01 and len(bd.birth_partitions) == 1


def _hyp(positions):
    return Hypothesis("h", tuple(Track(f"T{i}", np.r_[p, 0.0, 0.0], np.eye(4)) for i, p in enumerate(positions)))


def test_classification_outcomes():
    truth = {0: np.array([0.0, 0.0, 0, 0]), 1: np.array([100.0, 0.0, 0, 0]), 2: np.array([500.0, 0, 0, 0])}
    top = _hyp([[1.0, 0.0], [110.0, 0.0]])
    c = classify_estimates(top, truth, 5.0)
    assert c.hits == {0: True, 1: False, 2: False}
    assert c.misses == 1 and c.untracked == 1 and c.red_stars == 1
    extra = classify_estimates(_hyp([[0.0, 0.0], [1000.0, 1000.0]]), {0: truth[0]}, 5.0)
    assert extra.extra == ("T1",) and extra.red_stars == 1


def test_run_tracker_yields_one_result_per_scan():
    sc = generate_scenario(_small(), 2)
    res = list(run_tracker(sc, RunConfig(mcmc_steps=500, burn_in=50)))
    assert [r.scan for r in res] == [1, 2, 3, 4, 5]
    assert all(all(r.classification.hits.values()) for r in res)


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(method="jpda")
    with pytest.raises(ValueError):
        RunConfig(mcmc_steps=10, burn_in=10)
    assert RunConfig(method="homht").gate_on and not RunConfig().gate_on
