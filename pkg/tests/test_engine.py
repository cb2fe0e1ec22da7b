import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rfisst.association import SamplerConfig, enumerate_associations
from rfisst.core import NO_BIRTH_DEATH, BranchKind, BranchTag, Hypothesis, HypothesisForest, Track, canonical_key
from rfisst.engine import (
    EXHAUSTIVE,
    BirthDeathConfig,
    BirthDeathError,
    TrackerModels,
    Weighting,
    association_prior,
    child_log_prior_table,
    expected_object_count,
    log_return_size_factor,
    predict_hypothesis,
    prune,
    scan,
    spawn_children,
    update_child,
)
from rfisst.gaussian import MeasurementModel, constant_velocity
from rfisst.oracle import brute_force_posterior
from rfisst.validation import Partition, engine_weights, random_birth_death, random_instance, total_variation


def _tracks(n):
    return tuple(Track(f"T{i}", np.r_[5.0 * i, 0.0, 0.0, 0.0], np.eye(4)) for i in range(n))


def _prior_total(m, M, pD, alpha, beta, n_births=1):
    parent = Hypothesis("0:0", _tracks(M))
    bd = BirthDeathConfig(alpha, beta, [Partition(np.zeros(4), np.eye(4))] * n_births)
    total = 0.0
    for tag, _ in spawn_children(parent, m, bd):
        M_child = M + (tag.kind is BranchKind.BIRTH) - (tag.kind is BranchKind.DEATH)
        for a in enumerate_associations(m, M_child):
            total += association_prior(a.k, m, M_child, tag, bd, pD, n_death=len(bd.death_candidates(parent.tracks)))
    return total


@pytest.mark.parametrize("alpha", [0.0, 0.01, 0.05])
@pytest.mark.parametrize("beta", [0.0, 0.01, 0.05])
@pytest.mark.parametrize("m,M", [(m, M) for m in range(5) for M in range(5)])
def test_prior_sums_to_one(m, M, alpha, beta):
    assert abs(_prior_total(m, M, 0.9, alpha, beta) - 1.0) < 1e-12


def test_prior_with_no_measurements_is_certain():
    # conditioned on m = 0 the only association is all-missed
    tag = NO_BIRTH_DEATH
    assert math.isclose(association_prior(0, 0, 3, tag, BirthDeathConfig(), 0.9), 1.0)


@given(st.integers(0, 6), st.integers(0, 6), st.floats(0.05, 0.95))
def test_return_size_factor(m, M, pD):
    z = math.exp(log_return_size_factor(m, M, pD))
    ref = sum(math.comb(M, n) * pD**n * (1 - pD) ** (M - n) for n in range(min(m, M) + 1))
    assert math.isclose(z, ref, rel_tol=1e-12)
    if m >= M:
        assert math.isclose(z, 1.0, rel_tol=1e-12)


def test_prior_table_mht_vs_hfisst():
    h = child_log_prior_table(3, 4, 0.8, 0.0, Weighting.HFISST)
    mht = child_log_prior_table(3, 4, 0.8, 0.0, Weighting.MHT)
    for k in range(4):
        assert math.isclose(mht[k] - h[k], math.log(math.comb(3, k) * math.factorial(k)), abs_tol=1e-12)


def test_spawn_children_counts():
    parent = Hypothesis("0:0", _tracks(3))
    parts = [Partition(np.zeros(4), np.eye(4))] * 2
    tags = [t for t, _ in spawn_children(parent, 2, BirthDeathConfig(0.01, 0.02, parts))]
    assert tags[0] == NO_BIRTH_DEATH
    assert sum(t.kind is BranchKind.BIRTH for t in tags) == 2
    assert sum(t.kind is BranchKind.DEATH for t in tags) == 3
    assert len(spawn_children(parent, 2, BirthDeathConfig())) == 1
    with pytest.raises(BirthDeathError):
        spawn_children(parent, 2, BirthDeathConfig(0.5, 0.2, parts))


def test_predict_hypothesis_branches():
    parent = Hypothesis("0:0", _tracks(2))
    dyn = constant_velocity()
    d = predict_hypothesis(parent, BranchTag.death("T1"), dyn, 1.0)
    assert d.labels == ("T0",)
    part = Partition(np.ones(4), 2 * np.eye(4))
    b = predict_hypothesis(parent, BranchTag.birth(0), dyn, 1.0, [part], label="B1.0")
    assert b.labels == ("T0", "T1", "B1.0")
    np.testing.assert_array_equal(b.track("B1.0").mean, part.mean)
    with pytest.raises(ValueError):
        predict_hypothesis(parent, BranchTag.death("T9"), dyn, 1.0)


def test_update_child_and_cache():
    pred = predict_hypothesis(Hypothesis("0:0", _tracks(2)), NO_BIRTH_DEATH, constant_velocity(), 1.0)
    meas = MeasurementModel.position(1.0)
    zs = np.array([[0.2, 0.1], [50.0, 50.0]])
    from rfisst.core import CLUTTER, AssociationMap

    cache = {}
    child, ll = update_child(pred, AssociationMap(("T0", CLUTTER)), zs, meas, -7.0, cache)
    assert child.track("T1") is pred.track("T1")
    assert len(cache) == 1
    again, ll2 = update_child(pred, AssociationMap(("T0", CLUTTER)), zs, meas, -7.0, cache)
    assert ll == ll2 and again.track("T0") is child.track("T0")


def test_prune_keeps_heaviest_and_renormalizes():
    hs = tuple(Hypothesis(f"0:{i}", (), math.log(w)) for i, w in enumerate([0.1, 0.4, 0.2, 0.3]))
    p = prune(HypothesisForest(hs), 2)
    assert [h.id for h in p] == ["0:1", "0:3"]
    assert math.isclose(p.weights.sum(), 1.0)
    with pytest.raises(ValueError):
        prune(HypothesisForest(hs), 0)


def test_expected_object_count():
    hs = (Hypothesis("a", _tracks(2), math.log(0.3)), Hypothesis("b", _tracks(3), math.log(0.7)))
    c = expected_object_count(HypothesisForest(hs))
    assert c.mode == 3 and math.isclose(c.mean, 2.7) and c.distribution == {2: 0.3, 3: 0.7}


@pytest.mark.parametrize("M,m", [(0, 2), (1, 3), (2, 2), (3, 2), (3, 0), (4, 3)])
@pytest.mark.parametrize("weighting", [Weighting.HFISST, Weighting.MHT])
def test_exhaustive_scan_matches_brute_force(M, m, weighting):
    rng = np.random.default_rng(100 * M + m)
    forest, zs, models = random_instance(rng, M, m, n_parents=2)
    bd = random_birth_death(rng, 0.03, 0.02, 2)
    exact = brute_force_posterior(forest, zs, models, bd, weighting=weighting.value)
    assert total_variation(engine_weights(forest, zs, models, bd, weighting=weighting), exact) < 1e-12


def test_scan_weights_sum_to_one_and_ids():
    rng = np.random.default_rng(3)
    forest, zs, models = random_instance(rng, 3, 3, n_parents=3)
    new, rep = scan(forest, zs, models, BirthDeathConfig(), SamplerConfig(100, 2000, 5), 6, seed=1)
    assert abs(new.weights.sum() - 1.0) < 1e-9 and len(new) <= 6
    assert [h.id for h in new] == [f"1:{i}" for i in range(len(new))]
    assert np.all(np.diff(new.log_weights) <= 0)
    assert rep.hypothesis_count == len(new) and rep.mcmc_steps == 3 * 2100


def test_scan_is_invariant_to_thread_count():
    rng = np.random.default_rng(4)
    forest, zs, models = random_instance(rng, 4, 3, n_parents=4)
    cfg = SamplerConfig(100, 3000, 6)
    a, _ = scan(forest, zs, models, BirthDeathConfig(), cfg, 10, seed=5, threads=1)
    b, _ = scan(forest, zs, models, BirthDeathConfig(), cfg, 10, seed=5, threads=3)
    assert [canonical_key(h) for h in a] == [canonical_key(h) for h in b]
    assert np.array_equal(a.log_weights, b.log_weights)


def test_scan_is_invariant_to_track_order():
    rng = np.random.default_rng(6)
    forest, zs, models = random_instance(rng, 3, 2)
    h = forest.hypotheses[0]
    flipped = HypothesisForest((Hypothesis(h.id, h.tracks[::-1], h.log_weight),), 0)
    a = engine_weights(forest, zs, models, BirthDeathConfig())
    b = engine_weights(flipped, zs, models, BirthDeathConfig())
    assert a.keys() == b.keys()
    assert max(abs(a[k] - b[k]) for k in a) < 1e-12


def test_time_update_only():
    rng = np.random.default_rng(7)
    forest, _, models = random_instance(rng, 2, 0, n_parents=2)
    new, rep = scan(forest, None, models, BirthDeathConfig(), EXHAUSTIVE, 5)
    assert np.allclose(new.weights, np.sort(forest.weights)[::-1])
    assert rep.mcmc_steps == 0


def test_undetectable_tracks_are_carried():
    dyn = constant_velocity()
    meas = MeasurementModel.position(1.0)
    models = TrackerModels(dyn, meas, 1.0, 0.9, -5.0, detectable=lambda p: p[:, 0] < 100.0)
    far = Track("far", np.r_[500.0, 0, 0, 0], np.eye(4))
    near = Track("near", np.zeros(4), np.eye(4))
    forest = HypothesisForest((Hypothesis("0:0", (near, far)),))
    new, _ = scan(forest, np.array([[0.1, 0.0]]), models, BirthDeathConfig(), EXHAUSTIVE, 10, weight_floor=0.0)
    assert len(new) == 2  # near detected or clutter; far never appears in an association
    for h in new:
        assert "far" not in h.lineage.association.assignments


def test_birth_tracks_get_scan_labels():
    rng = np.random.default_rng(8)
    forest, zs, models = random_instance(rng, 1, 1)
    bd = random_birth_death(rng, 0.2, 0.0, 1)
    new, _ = scan(forest, zs, models, bd, EXHAUSTIVE, 100, weight_floor=0.0)
    born = [h for h in new if h.lineage.tag.kind is BranchKind.BIRTH]
    assert born and all("B1.0" in h.labels for h in born)
