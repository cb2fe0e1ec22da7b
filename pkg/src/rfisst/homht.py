"""Hypothesis-oriented MHT baseline.

Same prediction, enumeration, update and pruning as the exhaustive H-FISST
scan; only the child prior drops the 1/(C(m,k) k!) factor.
"""

from __future__ import annotations

import math
from dataclasses import replace

from .association import ENUMERATION_CAP, GATE_DEFAULT, EnumerationCapExceeded, count_associations
from .core import HypothesisForest
from .engine import (
    EXHAUSTIVE,
    BirthDeathConfig,
    ScanReport,
    TrackerModels,
    Weighting,
    _xlog,
    expected_object_count,
    scan,
)

MhtWeighting = Weighting


def mht_child_logscore(k: int, m: int, pD: float, assoc_loglik: float, M: int) -> float:
    """log eta^MHT = k log pD + (M-k) log(1-pD) + sum of association log-likelihoods."""
    if not 0 <= k <= min(m, M):
        raise ValueError(f"k={k} outside [0, min(m, M)]")
    return _xlog(k, pD) + _xlog(M - k, 1.0 - pD) + assoc_loglik


def hfisst_child_logscore(k: int, m: int, pD: float, assoc_loglik: float, M: int) -> float:
    return mht_child_logscore(k, m, pD, assoc_loglik, M) - math.lgamma(m + 1) + math.lgamma(m - k + 1)


def homht_models(models: TrackerModels, gate: bool = True) -> TrackerModels:
    """HOMHT defaults: Mahalanobis gating on unless switched off."""
    if gate and models.gate is None:
        return replace(models, gate=GATE_DEFAULT)
    if not gate:
        return replace(models, gate=None)
    return models


def homht_scan(forest: HypothesisForest, measurements, models: TrackerModels, H_inf: int,
               bd: BirthDeathConfig | None = None, *, cap: int = ENUMERATION_CAP,
               seed: int = 0, threads: int | None = None) -> tuple[HypothesisForest, ScanReport]:
    """Exhaustive scan with MHT weights.

    If any parent branch exceeds the enumeration cap the scan "breaks": the
    input forest is returned unchanged with ``report.broke`` set.
    """
    bd = bd or BirthDeathConfig()
    try:
        return scan(forest, measurements, models, bd, EXHAUSTIVE, H_inf,
                    weighting=Weighting.MHT, seed=seed, threads=threads, cap=cap)
    except EnumerationCapExceeded as exc:
        M, m = exc.size or (0, 0)
        report = ScanReport(
            scan_index=forest.scan_index + 1,
            hypothesis_count=len(forest),
            hypothesis_ids=tuple(h.id for h in forest.hypotheses),
            weights=forest.weights,
            cardinality=expected_object_count(forest),
            largest_branch=(M, count_associations(m, M)),
            broke=True,
            warnings=[f"HOMHT break: {exc}"],
        )
        return forest, report
