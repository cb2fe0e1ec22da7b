import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import chain_transition_matrix, stationary
from rfisst.association import (
    CLUTTER,
    DataAssociationMatrix,
    EnumerationCapExceeded,
    SamplerConfig,
    apply_move,
    association_array,
    association_logscore,
    build_da_matrix,
    count_associations,
    enumerate_associations,
    enumerate_columns,
    greedy_start,
    mcmc_sample,
    propose,
    sample_columns,
    score_array,
)
from rfisst.core import Track
from rfisst.engine import child_log_prior_table
from rfisst.gaussian import MeasurementModel


def _brute_count(m, M):
    n = 0
    for cols in itertools.product(range(M + 1), repeat=m):
        used = [c for c in cols if c != M]
        n += len(used) == len(set(used))
    return n


def _random_da(rng, m, M, gated=False):
    ll = rng.normal(-3.0, 2.0, (m, M + 1))
    if gated:
        ll[:, :M][rng.random((m, M)) < 0.3] = -np.inf
    return DataAssociationMatrix(ll, tuple(f"T{j}" for j in range(M)))


@pytest.mark.parametrize("m,M,expected", [(0, 0, 1), (1, 1, 2), (2, 2, 7), (3, 1, 4), (5, 10, 63591)])
def test_count_associations_examples(m, M, expected):
    assert count_associations(m, M) == expected


@pytest.mark.parametrize("m,M", [(m, M) for m in range(5) for M in range(5)])
def test_count_matches_brute_force(m, M):
    assert count_associations(m, M) == _brute_count(m, M)
    assert count_associations(m, M) == count_associations(M, m)


def test_count_is_exact_for_huge_problems():
    a = count_associations(25, 40)
    assert isinstance(a, int) and a > 10**36
    assert a == sum(math.comb(40, n) * math.comb(25, n) * math.factorial(n) for n in range(26))


def test_enumerate_two_by_two_structure():
    maps = list(enumerate_associations(2, 2, ("T1", "T2")))
    got = {a.assignments for a in maps}
    assert len(got) == 7
    assert (CLUTTER, CLUTTER) in got and ("T1", "T2") in got and ("T2", "T1") in got


@given(st.integers(0, 5), st.integers(0, 5))
def test_enumeration_is_distinct_and_complete(m, M):
    cols = list(enumerate_columns(m, M))
    assert len(cols) == len(set(cols)) == count_associations(m, M)
    assert cols == sorted(cols)


def test_enumeration_cap():
    with pytest.raises(EnumerationCapExceeded):
        list(enumerate_columns(5, 10, cap=1000))


@given(st.integers(1, 4), st.integers(0, 4), st.integers(0, 2**31))
def test_association_array_matches_generator(m, M, seed):
    rng = np.random.default_rng(seed)
    da = _random_da(rng, m, M, gated=True)
    arr = association_array(da)
    allowed = np.isfinite(da.loglik[:, :M])
    ref = list(enumerate_columns(m, M, allowed))
    assert [tuple(r) for r in arr] == ref
    full = association_array(da, skip_infeasible=False)
    assert len(full) == count_associations(m, M)


def test_score_array_matches_logscore(rng):
    da = _random_da(rng, 3, 3)
    prior = child_log_prior_table(3, 3, 0.8, 0.0)
    arr = association_array(da)
    sc = score_array(arr, da, prior)
    for row, s in zip(arr, sc):
        assert math.isclose(s, association_logscore(tuple(row), da, prior), rel_tol=1e-12)


def test_build_da_matrix_permutation_and_gate(rng):
    meas = MeasurementModel.position(1.0)
    tracks = [Track(f"T{i}", np.r_[10.0 * i, 0, 0, 0], np.eye(4)) for i in range(4)]
    zs = np.array([[0.1, 0.0], [20.2, 0.0]])
    da = build_da_matrix(tracks, zs, meas, -5.0, rng=np.random.default_rng(3), gate=9.0)
    assert sorted(da.permutation) == [0, 1, 2, 3]
    assert da.track_labels == tuple(tracks[i].label for i in da.permutation)
    c0 = da.track_labels.index("T0")
    assert np.isfinite(da.loglik[0, c0]) and np.isneginf(da.loglik[1, c0])
    np.testing.assert_array_equal(da.loglik[:, 4], [-5.0, -5.0])


def test_apply_move_semantics():
    assert apply_move((0, 2), 1, 0, 2) == (2, 0)
    assert apply_move((0, 1), 0, 2, 2) == (2, 1)


@given(st.integers(1, 4), st.integers(0, 4), st.integers(0, 2**31))
def test_propose_stays_valid(m, M, seed):
    rng = np.random.default_rng(seed)
    cols = tuple(M for _ in range(m))
    for _ in range(20):
        cols = propose(cols, M, rng)
        used = [c for c in cols if c != M]
        assert len(used) == len(set(used))


def test_chain_is_irreducible(rng):
    # every state reaches every other through single moves
    da = _random_da(rng, 3, 2)
    states, _, P = chain_transition_matrix(da, child_log_prior_table(3, 2, 0.9, 0.0))
    reach = (P > 0).astype(int)
    for _ in range(len(states)):
        reach = ((reach + reach @ (P > 0)) > 0).astype(int)
    assert reach.all()


def test_visit_frequencies_match_chain_stationary_distribution():
    rng = np.random.default_rng(1)
    da = _random_da(rng, 2, 2)
    prior = child_log_prior_table(2, 2, 0.9, 0.0)
    states, _, P = chain_transition_matrix(da, prior)
    pi = stationary(P)
    cfg = SamplerConfig(10_000, 400_000, 7, record_proposals=False)
    res = sample_columns(da, prior, cfg, np.random.default_rng(2))
    freq = {tuple(c): v / cfg.post_burn_steps for c, v in zip(res.columns, res.visits)}
    tv = 0.5 * sum(abs(pi[i] - freq.get(s, 0.0)) for i, s in enumerate(states))
    assert tv < 0.01


def test_sampler_is_seed_deterministic(rng):
    da = _random_da(rng, 4, 4)
    prior = child_log_prior_table(4, 4, 0.9, 0.0)
    cfg = SamplerConfig(100, 2000, 5)
    a = sample_columns(da, prior, cfg, np.random.default_rng(9))
    b = sample_columns(da, prior, cfg, np.random.default_rng(9))
    np.testing.assert_array_equal(a.columns, b.columns)
    np.testing.assert_array_equal(a.visits, b.visits)


def test_sampler_results_are_distinct_sorted_and_scored(rng):
    da = _random_da(rng, 3, 4)
    prior = child_log_prior_table(3, 4, 0.9, 0.0)
    res = sample_columns(da, prior, SamplerConfig(100, 5000, 10), np.random.default_rng(0))
    assert len({tuple(c) for c in res.columns}) == len(res)
    assert np.all(np.diff(res.scores) <= 0)
    np.testing.assert_allclose(res.scores, score_array(res.columns, da, prior))
    assert res.visits.sum() == 5000


def test_recorded_proposals_do_not_change_the_path(rng):
    da = _random_da(rng, 3, 3)
    prior = child_log_prior_table(3, 3, 0.9, 0.0)
    a = sample_columns(da, prior, SamplerConfig(50, 3000, 4, record_proposals=True), np.random.default_rng(5))
    b = sample_columns(da, prior, SamplerConfig(50, 3000, 4, record_proposals=False), np.random.default_rng(5))
    visited_a = {tuple(c): v for c, v in zip(a.columns, a.visits) if v > 0}
    visited_b = {tuple(c): v for c, v in zip(b.columns, b.visits)}
    assert visited_a == visited_b and a.accepted == b.accepted


@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**31))
def test_mcmc_finds_the_best_association(m, M, seed):
    rng = np.random.default_rng(seed)
    da = _random_da(rng, m, M)
    prior = child_log_prior_table(m, M, 0.9, 0.0)
    best = max(score_array(association_array(da), da, prior))
    top = mcmc_sample(da, prior, SamplerConfig(200, 5000, 3), np.random.default_rng(seed))
    assert math.isclose(top[0][1], best, rel_tol=1e-12, abs_tol=1e-12)


def test_no_measurements():
    da = DataAssociationMatrix(np.zeros((0, 3)), ("a", "b"))
    res = sample_columns(da, np.array([0.0]), SamplerConfig(1, 10, 2))
    assert res.columns.shape == (1, 0)


def test_greedy_start_is_valid(rng):
    da = _random_da(rng, 5, 3)
    cols = greedy_start(da)
    used = [c for c in cols if c != 3]
    assert len(used) == len(set(used))


def test_sampler_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(burn_in=-1)
    with pytest.raises(ValueError):
        SamplerConfig(post_burn_steps=0)
