"""Brute-force reference implementations used only for verification.

Nothing here shares the engine's likelihood or update code: Gaussian
integrals and posteriors are computed in information form, and enumeration
uses itertools directly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import CLUTTER, NO_BIRTH_DEATH, BranchKind, BranchTag, Track

ORACLE_CAP = 1_000_000


class OracleSizeError(ValueError):
    pass


@dataclass(frozen=True)
class Gaussian:
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class FisstComponent:
    """Weight and the unordered pair of per-target Gaussians.

    ``association`` names, per measurement, the index of the pdf it updated
    (or None for clutter) and ``source`` the input component it came from;
    both are bookkeeping for comparisons.
    """

    weight: float
    pdfs: tuple[Gaussian, ...]
    association: tuple = ()
    source: int | None = None


def info_update(g: Gaussian, z, H, R) -> tuple[Gaussian, float]:
    """Posterior and log of the integral of N(z; Hx, R) N(x; mean, cov) dx.

    Computed by multiplying the two densities in information form and reading
    off the normalizing constant of the product.
    """
    z = np.asarray(z, dtype=float)
    P_inv = np.linalg.inv(g.cov)
    R_inv = np.linalg.inv(R)
    lam = P_inv + H.T @ R_inv @ H
    eta = P_inv @ g.mean + H.T @ R_inv @ z
    cov = np.linalg.inv(lam)
    mean = cov @ eta
    _, ld_R = np.linalg.slogdet(2 * np.pi * R)
    _, ld_P = np.linalg.slogdet(2 * np.pi * g.cov)
    _, ld_C = np.linalg.slogdet(2 * np.pi * cov)
    quad = z @ R_inv @ z + g.mean @ P_inv @ g.mean - eta @ cov @ eta
    return Gaussian(mean, 0.5 * (cov + cov.T)), float(-0.5 * (ld_R + ld_P - ld_C) - 0.5 * quad)


def predict_gaussian(g: Gaussian, dyn, dt: float) -> Gaussian:
    mean = np.asarray(dyn.propagate(g.mean[None, :], dt))[0]
    F = dyn.jacobian(g.mean, dt)
    return Gaussian(mean, F @ g.cov @ F.T + dyn.process_noise(dt))


# The two-target, two-measurement FISST MT-likelihood written out term by term:
# (coefficient name, {measurement: target variable}) with unassigned
# measurements attributed to clutter.
_TWO_TARGET_TERMS = (
    ("pd2/2", {0: 0, 1: 1}),
    ("pd2/2", {0: 1, 1: 0}),
    ("pdq/2", {0: 0}),
    ("pdq/2", {1: 0}),
    ("pdq/2", {0: 1}),
    ("pdq/2", {1: 1}),
    ("q2", {}),
)


def fisst_two_target_update(components, z1, z2, pD: float, g: float, models) -> list[FisstComponent]:
    """Set-theoretic FISST update of a two-target mixture with two measurements.

    ``components`` hold the prior (pre-prediction) pdf pairs; ``models`` is a
    TrackerModels-like object with ``dynamics``, ``dt`` and ``measurement``.
    The permutation-symmetric predicted MT-pdf times the MT-likelihood is
    expanded product by product; products are grouped by which pdf each
    measurement updated, and each group's weight is omega * coefficient *
    (1/2!) * the sum of its integrals.
    """
    coef = {"pd2/2": pD * pD / 2.0, "pdq/2": pD * (1 - pD) / 2.0, "q2": (1 - pD) ** 2}
    H, R = models.measurement.H, models.measurement.R
    zs = (np.asarray(z1, float), np.asarray(z2, float))
    groups: dict[tuple, list] = {}
    for ci, comp in enumerate(components):
        if len(comp.pdfs) != 2:
            raise ValueError("the two-target FISST oracle handles exactly two targets")
        pred = [predict_gaussian(p, models.dynamics, models.dt) for p in comp.pdfs]
        for name, assign in _TWO_TARGET_TERMS:
            c = coef[name]
            if c == 0.0:
                continue
            for sigma in ((0, 1), (1, 0)):  # variable v carries pdf sigma[v]
                log_int = 0.0
                post = list(pred)
                for zi, v in assign.items():
                    label = sigma[v]
                    post[label], li = info_update(pred[label], zs[zi], H, R)
                    log_int += li
                n_clutter = 2 - len(assign)
                log_int += n_clutter * math.log(g)
                key = (ci, tuple(sigma[assign[i]] if i in assign else None for i in range(2)))
                groups.setdefault(key, []).append((c, log_int, post))
    out = []
    for (ci, assoc), items in groups.items():
        omega = components[ci].weight
        w = omega * sum(c * math.exp(li) for c, li, _ in items) / 2.0
        out.append(FisstComponent(w, tuple(items[0][2]), assoc, ci))
    total = sum(c.weight for c in out)
    return [FisstComponent(c.weight / total, c.pdfs, c.association, c.source) for c in out]


def _log_gauss_marginals(track_mean, track_cov, zs, H, R):
    g = Gaussian(np.asarray(track_mean), np.asarray(track_cov))
    return [info_update(g, z, H, R)[1] for z in zs]


def brute_force_posterior(forest, measurements, models, bd, weighting: str = "hfisst",
                          cap: int = ORACLE_CAP) -> dict[tuple, float]:
    """Exact normalized child weights keyed like ``canonical_key``.

    Every branch and every association is enumerated. The prior is the raw
    ``factor * pD^k (1-pD)^(M-k) / (C(m,k) k!)`` (the last factor omitted for
    MHT), with M the number of detectable tracks in the branch.
    """
    zs = np.asarray(measurements, dtype=float).reshape(-1, models.measurement.H.shape[0])
    m = len(zs)
    H, R = models.measurement.H, models.measurement.R
    pD = models.pD
    if callable(models.clutter_logdensity):
        log_g = np.asarray(models.clutter_logdensity(zs), dtype=float).reshape(m)
    else:
        log_g = np.full(m, float(models.clutter_logdensity))
    births = list(bd.birth_partitions) if bd.alpha > 0 else []
    logs: dict[tuple, float] = {}
    for h in forest.hypotheses:
        pred = [predict_gaussian(Gaussian(t.mean, t.covariance), models.dynamics, models.dt) for t in h.tracks]
        labels = [t.label for t in h.tracks]
        if models.detectable is not None and pred:
            mask = np.asarray(models.detectable(np.stack([p.mean[:2] for p in pred])), dtype=bool)
        else:
            mask = np.ones(len(pred), dtype=bool)
        det = [(labels[i], pred[i]) for i in range(len(pred)) if mask[i]]
        if bd.beta > 0:
            rule = bd.death_candidates_rule
            cands = [lab for lab, _ in det if rule is None or rule(_as_track(lab, pred[labels.index(lab)]))]
        else:
            cands = []
        rest = 1.0 - len(births) * bd.alpha - len(cands) * bd.beta
        branches = [(NO_BIRTH_DEATH, rest, det)]
        for l, part in enumerate(births):
            branches.append((BranchTag.birth(l), bd.alpha, det + [(f"birth{l}", Gaussian(part.mean, part.covariance))]))
        for lab in cands:
            branches.append((BranchTag.death(lab), bd.beta, [d for d in det if d[0] != lab]))
        for tag, factor, cols in branches:
            if factor <= 0:
                continue
            ll = [_log_gauss_marginals(g.mean, g.cov, zs, H, R) for _, g in cols]
            M = len(cols)
            for k in range(min(m, M) + 1):
                prior = factor * pD**k * (1 - pD) ** (M - k)
                if weighting == "hfisst":
                    prior /= math.comb(m, k) * math.factorial(k)
                if prior == 0.0:
                    continue
                for meas_idx in itertools.combinations(range(m), k):
                    for trk_idx in itertools.permutations(range(M), k):
                        assign = [CLUTTER] * m
                        total = math.log(h.weight) + math.log(prior)
                        for zi, ti in zip(meas_idx, trk_idx):
                            assign[zi] = cols[ti][0]
                            total += ll[ti][zi]
                        for zi in range(m):
                            if assign[zi] == CLUTTER:
                                total += log_g[zi]
                        if tag.kind is BranchKind.BIRTH:
                            assign = [_birth_name(a, tag, forest.scan_index + 1) for a in assign]
                        logs[(h.id, tag.key, tuple(assign))] = total
                        if len(logs) > cap:
                            raise OracleSizeError(f"more than {cap} children")
    vals = np.array(list(logs.values()))
    top = vals.max()
    w = np.exp(vals - top)
    w /= w.sum()
    return dict(zip(logs.keys(), w.tolist()))


def _birth_name(a, tag, scan_index):
    return f"B{scan_index}.{tag.partition}" if a == f"birth{tag.partition}" else a


def _as_track(label, g):
    return Track(label, g.mean, g.cov)
