"""Hypothesis-generation timing on synthetic data-association problems."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .association import (
    ENUMERATION_CAP,
    EnumerationCapExceeded,
    SamplerConfig,
    association_array,
    build_da_matrix,
    count_associations,
    sample_columns,
    score_array,
)
from .core import Track
from .engine import child_log_prior_table
from .gaussian import MeasurementModel

DEFAULT_SIZES = ((4, 4), (5, 5), (6, 6), (7, 6), (8, 7), (9, 8), (10, 9), (12, 10),
                 (15, 12), (20, 15), (25, 18), (30, 20), (35, 22), (40, 25))


@dataclass(frozen=True)
class TimingRow:
    M: int
    m: int
    A_M: int
    method: str
    nanoseconds: int | None
    steps: int
    broke: bool


def synthetic_problem(M: int, m: int, rng: np.random.Generator, pD: float = 0.9, spread_km: float = 50.0):
    """Tracks scattered in a box; the first min(m, M) of them each emit one
    noisy measurement and the rest of the m measurements are clutter."""
    meas = MeasurementModel.position(1.0)
    cov = np.diag([4.0, 4.0, 0.01, 0.01])
    pos = rng.uniform(0.0, spread_km, (M, 2))
    tracks = [Track(f"T{i}", np.r_[pos[i], 0.0, 0.0], cov) for i in range(M)]
    n_true = min(m, M)
    zs = np.concatenate([pos[:n_true] + rng.normal(0.0, 2.0, (n_true, 2)),
                         rng.uniform(0.0, spread_km, (m - n_true, 2))])
    zs = zs[rng.permutation(m)]
    log_g = -math.log(spread_km**2)
    da = build_da_matrix(tracks, zs, meas, log_g)
    return da, child_log_prior_table(m, M, pD, 0.0)


def _time_homht(da, prior, cap):
    t0 = time.perf_counter_ns()
    cols = association_array(da, cap=cap, skip_infeasible=False)
    scores = score_array(cols, da, prior)
    np.argsort(-scores, kind="stable")
    return time.perf_counter_ns() - t0


def _time_rfisst(da, prior, cfg, rng):
    t0 = time.perf_counter_ns()
    sample_columns(da, prior, cfg, rng)
    return time.perf_counter_ns() - t0


def timing_benchmark(sizes=DEFAULT_SIZES, methods=("rfisst", "homht"), seed: int = 0, steps: int = 100_000,
                     burn_in: int | None = None, cap: int = ENUMERATION_CAP, repeats: int = 3,
                     clock: bool = True) -> list[TimingRow]:
    """Time child generation for one parent at each (M, m).

    HOMHT enumerates, scores and ranks every association; sizes whose count
    exceeds ``cap`` are recorded as BREAK without attempting them. RFISST runs
    a fixed-length chain. The fastest of ``repeats`` runs is kept. With
    ``clock=False`` no timing is taken and ``nanoseconds`` is None, which
    makes the table reproducible byte for byte.
    """
    if not sizes:
        raise ValueError("need at least one (M, m) size")
    burn_in = steps // 10 if burn_in is None else burn_in
    cfg = SamplerConfig(burn_in, steps - burn_in, 10, seed)
    # one call of each kernel outside the timed region so JIT compilation is excluded
    warm_da, warm_prior = synthetic_problem(2, 2, np.random.default_rng(seed))
    _time_homht(warm_da, warm_prior, cap)
    _time_rfisst(warm_da, warm_prior, SamplerConfig(1, 1, 1, seed), np.random.default_rng(seed))
    rows = []
    for M, m in sizes:
        A = count_associations(m, M)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(M, m)))
        da, prior = synthetic_problem(M, m, rng)
        for method in methods:
            if method == "homht":
                if A > cap:
                    rows.append(TimingRow(M, m, A, method, None, 0, True))
                    continue
                reps = repeats if A < 1_000_000 else 1
                ns = None
                if clock:
                    try:
                        ns = min(_time_homht(da, prior, cap) for _ in range(reps))
                    except EnumerationCapExceeded:
                        rows.append(TimingRow(M, m, A, method, None, 0, True))
                        continue
                rows.append(TimingRow(M, m, A, method, ns, 0, False))
            elif method == "rfisst":
                ns = None
                if clock:
                    ns = min(_time_rfisst(da, prior, cfg, np.random.default_rng(seed)) for _ in range(repeats))
                rows.append(TimingRow(M, m, A, method, ns, cfg.total_steps, False))
            else:
                raise ValueError(f"unknown method {method!r}")
    return rows


def loglog_slope(rows: list[TimingRow], method: str, min_A: int = 0) -> float:
    """Least-squares slope of log time against log A_M over timed rows."""
    pts = [(math.log(r.A_M), math.log(r.nanoseconds)) for r in rows
           if r.method == method and not r.broke and r.nanoseconds and r.A_M >= min_A]
    if len(pts) < 2:
        raise ValueError("need at least two timed rows")
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])
