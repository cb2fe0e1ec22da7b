"""Randomized cross-checks between the engine and the brute-force oracles.

Shared by the ``--oracle-check`` CLI mode and the test-suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CLUTTER, Hypothesis, HypothesisForest, Track, canonical_key
from .engine import EXHAUSTIVE, BirthDeathConfig, TrackerModels, Weighting, scan
from .gaussian import MeasurementModel, constant_velocity
from .oracle import FisstComponent, Gaussian, brute_force_posterior, fisst_two_target_update


@dataclass(frozen=True)
class Partition:
    mean: np.ndarray
    covariance: np.ndarray


def random_instance(rng: np.random.Generator, M: int, m: int, n_parents: int = 1, spread: float = 4.0,
                    pD: float | None = None):
    """Small linear-Gaussian problem where every pairing is plausible."""
    dyn = constant_velocity(2, accel_std=rng.uniform(0.05, 0.5))
    meas = MeasurementModel.position(rng.uniform(0.5, 1.5))
    pD = rng.uniform(0.5, 0.95) if pD is None else pD
    log_g = -math.log(rng.uniform(50.0, 400.0))
    models = TrackerModels(dyn, meas, 1.0, pD, log_g)
    lw = rng.normal(0.0, 1.0, n_parents)
    lw -= math.log(float(np.sum(np.exp(lw))))
    hyps = []
    for p in range(n_parents):
        tracks = []
        for i in range(M):
            a = rng.normal(0.0, 0.3, (4, 4))
            cov = np.diag([2.0, 2.0, 0.5, 0.5]) * rng.uniform(0.5, 2.0) + a @ a.T
            tracks.append(Track(f"T{i}", np.r_[rng.normal(0, spread, 2), rng.normal(0, 1, 2)], cov))
        hyps.append(Hypothesis(f"0:{p}", tuple(tracks), float(lw[p])))
    zs = rng.normal(0.0, spread, (m, 2))
    return HypothesisForest(tuple(hyps), 0), zs, models


def random_birth_death(rng: np.random.Generator, alpha: float, beta: float, n_partitions: int) -> BirthDeathConfig:
    parts = [Partition(np.r_[rng.normal(0, 2, 2), 0.0, 0.0], np.diag([30.0, 30.0, 4.0, 4.0]))
             for _ in range(n_partitions)]
    return BirthDeathConfig(alpha, beta, parts)


def engine_weights(forest, zs, models, bd, sampler=EXHAUSTIVE, weighting=Weighting.HFISST,
                   H_inf: int = 10**7, seed: int = 0) -> dict[tuple, float]:
    new, _ = scan(forest, zs, models, bd, sampler, H_inf, weighting=weighting, seed=seed, weight_floor=0.0)
    return {canonical_key(h): h.weight for h in new}


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def fisst_check(rng: np.random.Generator, n_parents: int = 2):
    """Engine versus the set-theoretic FISST update on one random instance.

    Returns (TV distance, association classes per component, max posterior
    mean difference over matched children).
    """
    forest, zs, models = random_instance(rng, 2, 2, n_parents=n_parents)
    comps = [FisstComponent(h.weight, tuple(Gaussian(t.mean, t.covariance) for t in h.tracks))
             for h in forest.hypotheses]
    fisst = fisst_two_target_update(comps, zs[0], zs[1], models.pD, math.exp(models.clutter_logdensity), models)
    new, _ = scan(forest, zs, models, BirthDeathConfig(), EXHAUSTIVE, 10**6, weight_floor=0.0)
    children = {canonical_key(h): h for h in new}
    oracle, mean_err = {}, 0.0
    for c in fisst:
        parent = forest.hypotheses[c.source]
        assign = tuple(CLUTTER if a is None else parent.labels[a] for a in c.association)
        key = (parent.id, "N", assign)
        oracle[key] = c.weight
        if key in children:
            for g, t in zip(c.pdfs, children[key].tracks):
                mean_err = max(mean_err, float(np.max(np.abs(g.mean - t.mean))))
    eng = {k: h.weight for k, h in children.items()}
    return total_variation(eng, oracle), len(fisst) // len(comps), mean_err


def brute_force_check(rng: np.random.Generator, M: int, m: int, alpha: float = 0.0, beta: float = 0.0,
                      n_partitions: int = 1, n_parents: int = 1, weighting: Weighting = Weighting.HFISST) -> float:
    forest, zs, models = random_instance(rng, M, m, n_parents=n_parents)
    bd = random_birth_death(rng, alpha, beta, n_partitions)
    exact = brute_force_posterior(forest, zs, models, bd, weighting=weighting.value)
    return total_variation(engine_weights(forest, zs, models, bd, weighting=weighting), exact)


def mcmc_top_check(rng: np.random.Generator, M: int, m: int, sampler, seed: int = 0,
                   negligible: float = 1e-9) -> tuple[bool, float]:
    """Does the sampler recover the exhaustive top-C children of one parent?

    Children whose exact weight is below ``negligible`` count as zero and may
    be missing. Returns (recovered, max weight difference after renormalizing
    both sides over the recovered top-C set).
    """
    forest, zs, models = random_instance(rng, M, m)
    bd = BirthDeathConfig()
    exact = engine_weights(forest, zs, models, bd)
    sampled = engine_weights(forest, zs, models, bd, sampler=sampler, seed=seed)
    C = min(sampler.max_distinct, len(exact))
    top = sorted(exact, key=lambda k: (-exact[k], k))[:C]
    needed = [k for k in top if exact[k] >= negligible]
    if not set(needed) <= set(sampled):
        return False, math.inf
    common = [k for k in top if k in sampled]
    ze = sum(exact[k] for k in common)
    zs_ = sum(sampled[k] for k in common)
    return True, max(abs(exact[k] / ze - sampled[k] / zs_) for k in common)


def oracle_report(seed: int = 0, n: int = 100) -> dict:
    """Maximum deviations over ``n`` random instances of each check."""
    from .association import SamplerConfig

    rng = np.random.default_rng(seed)
    fisst = [fisst_check(rng) for _ in range(n)]
    bf = [brute_force_check(rng, int(rng.integers(0, 5)), int(rng.integers(0, 4)), 0.02, 0.02,
                            int(rng.integers(1, 3)), int(rng.integers(1, 3))) for _ in range(n)]
    sampler = SamplerConfig(10_000, 90_000, 10, seed)
    mc = [mcmc_top_check(rng, int(rng.integers(1, 5)), int(rng.integers(1, 4)), sampler, seed=i)
          for i in range(max(1, n // 10))]
    return {
        "instances": n,
        "fisst_max_tv": max(a[0] for a in fisst),
        "fisst_classes_per_component": sorted({a[1] for a in fisst}),
        "fisst_max_mean_error": max(a[2] for a in fisst),
        "brute_force_max_tv": max(bf),
        "mcmc_top_c_recovered": sum(ok for ok, _ in mc),
        "mcmc_instances": len(mc),
        "mcmc_max_weight_error": max(err for _, err in mc),
    }
