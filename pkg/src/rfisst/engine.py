"""Hypothesis-level recursion: branch spawning, child generation, weighting,
global normalization and pruning.

Each parent hypothesis splits into a no-event branch, one birth branch per FOV
partition and one death branch per detectable track. Inside a branch every
data association between the predicted tracks and the scan's measurements is
a candidate child with weight

    w_ij  ∝  w_i · factor(branch) · pD^k (1-pD)^(M-k) / (C(m,k) k!) · l_ij

where M counts the branch's detectable tracks and k how many of them are
assigned a measurement. Children come either from the Metropolis sampler or,
in EXHAUSTIVE mode, from full enumeration.
"""

from __future__ import annotations

import enum
import math
import os
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .association import (
    ENUMERATION_CAP,
    EnumerationCapExceeded,
    DataAssociationMatrix,
    SamplerConfig,
    _clutter_column,
    association_array,
    count_associations,
    count_feasible,
    sample_columns,
    score_array,
)
from .core import (
    CLUTTER,
    AssociationMap,
    BranchKind,
    BranchTag,
    DegenerateForestError,
    Hypothesis,
    HypothesisForest,
    Lineage,
    NO_BIRTH_DEATH,
    Track,
    canonical_key,
    normalize_log_weights,
)
from .gaussian import (
    DynamicsModel,
    MeasurementModel,
    PropagationError,
    SingularInnovationError,
    loglik_at_mean,
    measurement_logliks,
    predict_tracks,
    update_track,
)

WEIGHT_FLOOR = 1e-12


class Weighting(enum.Enum):
    """HFISST keeps the 1/(C(m,k) k!) factor in the child prior; MHT drops it."""

    HFISST = "hfisst"
    MHT = "mht"


class _Exhaustive:
    def __repr__(self):
        return "EXHAUSTIVE"


EXHAUSTIVE = _Exhaustive()


class BirthDeathError(ValueError):
    """Birth/death probabilities too large for the one-event model."""


@dataclass(frozen=True)
class BirthDeathConfig:
    alpha: float = 0.0
    beta: float = 0.0
    birth_partitions: tuple = ()
    death_candidates_rule: Callable[[Track], bool] | None = None

    def __post_init__(self):
        object.__setattr__(self, "birth_partitions", tuple(self.birth_partitions))
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.beta <= 1.0):
            raise BirthDeathError("alpha and beta must lie in [0, 1]")

    @property
    def n_births(self) -> int:
        return len(self.birth_partitions) if self.alpha > 0 else 0

    def death_candidates(self, tracks: Sequence[Track]) -> list[Track]:
        if self.beta <= 0:
            return []
        if self.death_candidates_rule is None:
            return list(tracks)
        return [t for t in tracks if self.death_candidates_rule(t)]


@dataclass(frozen=True)
class TrackerModels:
    """Everything the engine needs to predict, score and update.

    ``detectable`` maps an (n, 2) array of predicted positions to a boolean
    mask; undetectable tracks are carried through a scan untouched by the
    association problem (their effective pD is zero). ``gate`` is a squared
    Mahalanobis threshold, None for no gating.
    """

    dynamics: DynamicsModel
    measurement: MeasurementModel
    dt: float
    pD: float
    clutter_logdensity: float | Callable[[np.ndarray], np.ndarray]
    detectable: Callable[[np.ndarray], np.ndarray] | None = None
    gate: float | None = None
    at_mean: bool = False

    def __post_init__(self):
        if not 0.0 <= self.pD <= 1.0:
            raise ValueError("pD must lie in [0, 1]")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    def detectable_mask(self, tracks: Sequence[Track]) -> np.ndarray:
        if not tracks:
            return np.zeros(0, dtype=bool)
        if self.detectable is None:
            return np.ones(len(tracks), dtype=bool)
        pos = np.stack([t.position for t in tracks])
        return np.asarray(self.detectable(pos), dtype=bool).reshape(len(tracks))


# ---------------------------------------------------------------- priors


def _xlog(n: int, p: float) -> float:
    if n == 0:
        return 0.0
    return n * math.log(p) if p > 0 else -math.inf


def _log_assign_count(m: int, k: int) -> float:
    """log(C(m,k) k!), the number of ordered ways to pick k of m measurements."""
    return math.lgamma(m + 1) - math.lgamma(m - k + 1)


def log_return_size_factor(m: int, M: int, pD: float) -> float:
    """log P(at most m of M detectable tracks are detected).

    Equals 0 whenever m >= M. Dividing the raw prior by this makes it a
    distribution over associations given the observed m.
    """
    terms = [math.log(math.comb(M, n)) + _xlog(n, pD) + _xlog(M - n, 1.0 - pD) for n in range(min(m, M) + 1)]
    top = max(terms)
    if top == -math.inf:
        return -math.inf
    return top + math.log(sum(math.exp(t - top) for t in terms))


def branch_factor(tag: BranchTag, bd: BirthDeathConfig, n_death: int) -> float:
    if tag.kind is BranchKind.BIRTH:
        return bd.alpha
    if tag.kind is BranchKind.DEATH:
        return bd.beta
    return 1.0 - bd.n_births * bd.alpha - n_death * bd.beta


def child_log_prior_table(m: int, M: int, pD: float, log_factor: float,
                          weighting: Weighting = Weighting.HFISST) -> np.ndarray:
    """Unconditioned log prior of a child as a function of k = 0..min(m, M)."""
    if not 0.0 <= pD <= 1.0:
        raise ValueError("pD must lie in [0, 1]")
    out = np.empty(min(m, M) + 1)
    for k in range(len(out)):
        v = log_factor + _xlog(k, pD) + _xlog(M - k, 1.0 - pD)
        if weighting is Weighting.HFISST:
            v -= _log_assign_count(m, k)
        out[k] = v
    return out


def association_prior(k: int, m: int, M_child: int, tag: BranchTag, bd: BirthDeathConfig, pD: float,
                      n_death: int = 0) -> float:
    """Prior probability p_ij of one child given the scan returned m measurements.

    ``n_death`` is the parent's number of death candidates, needed for the
    no-event branch factor. Summed over every branch and association of a
    parent the result is exactly one.
    """
    if not 0.0 <= pD <= 1.0:
        raise ValueError("pD must lie in [0, 1]")
    if not 0 <= k <= min(m, M_child):
        raise ValueError(f"k={k} outside [0, min(m, M)]")
    factor = branch_factor(tag, bd, n_death)
    if factor <= 0:
        return 0.0
    log_z = log_return_size_factor(m, M_child, pD)
    if log_z == -math.inf:
        return 0.0
    table = child_log_prior_table(m, M_child, pD, math.log(factor))
    return math.exp(table[k] - log_z)


def spawn_children(parent: Hypothesis, m: int, bd: BirthDeathConfig,
                   death_candidates: Sequence[Track] | None = None) -> list[tuple[BranchTag, float]]:
    """Branch tags of ``parent`` with their log branch factors.

    Zero-probability branches are omitted, so alpha = beta = 0 yields only the
    no-event branch. ``m`` does not change the branches; it is accepted so the
    call mirrors the rest of the per-scan interface.
    """
    cands = bd.death_candidates(parent.tracks) if death_candidates is None else list(death_candidates)
    if bd.beta <= 0:
        cands = []
    n_b, n_d = bd.n_births, len(cands)
    rest = 1.0 - n_b * bd.alpha - n_d * bd.beta
    if rest <= 0:
        raise BirthDeathError("birth/death rates too large for one-event model")
    tags = [(NO_BIRTH_DEATH, math.log(rest))]
    tags += [(BranchTag.birth(l), math.log(bd.alpha)) for l in range(n_b)]
    tags += [(BranchTag.death(t.label), math.log(bd.beta)) for t in cands]
    return tags


# ---------------------------------------------------------------- per-hypothesis ops


def birth_label(scan_index: int, partition: int) -> str:
    return f"B{scan_index}.{partition}"


def _birth_track(source, partition: int, label: str) -> Track:
    if callable(source):
        mean, cov = source(partition)
        return Track(label, mean, cov)
    p = source[partition]
    return Track(label, p.mean, p.covariance)


def predict_hypothesis(parent: Hypothesis, tag: BranchTag, dyn: DynamicsModel, dt: float,
                       birth_pdf_source=None, label: str | None = None) -> Hypothesis:
    """Predicted, weightless hypothesis for one branch.

    ``birth_pdf_source`` is a sequence of partitions (with ``mean`` and
    ``covariance``) or a callable ``l -> (mean, cov)``; the birth pdf is
    appended unpropagated since it describes the state at the scan time.
    """
    tracks = list(parent.tracks)
    if tag.kind is BranchKind.DEATH:
        if tag.label not in parent.labels:
            raise ValueError(f"DEATH label {tag.label!r} not in parent {parent.id}")
        tracks = [t for t in tracks if t.label != tag.label]
    out = predict_tracks(tracks, dyn, dt)
    if tag.kind is BranchKind.BIRTH:
        if birth_pdf_source is None:
            raise ValueError("BIRTH branch needs a birth pdf source")
        out.append(_birth_track(birth_pdf_source, tag.partition, label or f"B?.{tag.partition}"))
    return Hypothesis(parent.id, tuple(out), 0.0, Lineage(parent.id, tag))


def update_child(pred: Hypothesis, a: AssociationMap, measurements, meas_model: MeasurementModel,
                 clutter, cache: dict | None = None) -> tuple[Hypothesis, float]:
    """Kalman-update the tracks named in ``a`` and return (child, log l_ij).

    Raises ``SingularInnovationError`` if an innovation covariance is singular;
    the engine drops such children.
    """
    zs = np.asarray(measurements, dtype=float).reshape(-1, meas_model.H.shape[0])
    if len(a.assignments) != len(zs):
        raise ValueError("association and measurement set sizes differ")
    if not len(zs):
        return pred, 0.0
    by_label = {t.label: t for t in pred.tracks}
    clutter_ll = _clutter_column(clutter, zs)
    updated = {}
    log_l = 0.0
    for i, lab in enumerate(a.assignments):
        if lab == CLUTTER:
            log_l += float(clutter_ll[i])
            continue
        if lab not in by_label:
            raise ValueError(f"association names unknown track {lab!r}")
        t = by_label[lab]
        key = (t, i)
        if cache is not None and key in cache:
            new, ll = cache[key]
        else:
            new, ll = update_track(t, zs[i], meas_model)
            if cache is not None:
                cache[key] = (new, ll)
        updated[lab] = new
        log_l += ll
    tracks = tuple(updated.get(t.label, t) for t in pred.tracks)
    lineage = pred.lineage if pred.lineage is None else Lineage(pred.lineage.parent_id, pred.lineage.tag, a)
    return Hypothesis(pred.id, tracks, pred.log_weight, lineage), log_l


# ---------------------------------------------------------------- forest ops


def prune(forest: HypothesisForest, H_inf: int, rng: np.random.Generator | None = None) -> HypothesisForest:
    """Keep the ``H_inf`` heaviest hypotheses (ties by canonical key) and renormalize.

    With ``rng`` the survivors are instead drawn without replacement in
    proportion to weight.
    """
    if H_inf < 1:
        raise ValueError("H_inf must be >= 1")
    hyps = sorted(forest.hypotheses, key=lambda h: (-h.log_weight, canonical_key(h)))
    if rng is not None and len(hyps) > H_inf:
        w = np.exp(normalize_log_weights([h.log_weight for h in hyps]))
        n_pos = int(np.count_nonzero(w))
        if n_pos >= H_inf:
            idx = np.sort(rng.choice(len(hyps), size=H_inf, replace=False, p=w))
            hyps = [hyps[i] for i in idx]
    hyps = hyps[:H_inf]
    lw = normalize_log_weights([h.log_weight for h in hyps])
    return HypothesisForest(tuple(h.with_log_weight(float(v)) for h, v in zip(hyps, lw)), forest.scan_index)


@dataclass(frozen=True)
class Cardinality:
    mean: float
    distribution: dict
    mode: int


def expected_object_count(forest: HypothesisForest) -> Cardinality:
    dist: dict[int, float] = {}
    for h, w in zip(forest.hypotheses, forest.weights):
        n = len(h.tracks)
        dist[n] = dist.get(n, 0.0) + float(w)
    dist = dict(sorted(dist.items()))
    mean = sum(n * p for n, p in dist.items())
    mode = max(dist, key=lambda n: (dist[n], n))
    return Cardinality(mean, dist, mode)


# ---------------------------------------------------------------- scan


@dataclass
class ScanReport:
    scan_index: int
    hypothesis_count: int
    hypothesis_ids: tuple[str, ...]
    weights: np.ndarray
    cardinality: Cardinality
    generation_ns: int = 0
    mcmc_steps: int = 0
    distinct_children: int = 0
    largest_branch: tuple[int, int] = (0, 0)  # (M, A_M) of the biggest association problem
    broke: bool = False
    warnings: list[str] = field(default_factory=list)


@dataclass
class _Branch:
    parent: int
    tag: BranchTag
    labels: tuple[str, ...]  # DA column order
    tracks: tuple[Track, ...]  # predicted, DA column order
    carried: tuple[Track, ...]  # undetectable predicted tracks
    columns: np.ndarray  # (n, m)
    log_weights: np.ndarray
    birth: Track | None = None


def _substream(seed: int, scan_index: int, parent_id: str, branch: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(scan_index, zlib.crc32(parent_id.encode()), branch))
    return np.random.default_rng(ss)


def thread_count(threads: int | None = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    try:
        return max(1, int(os.environ.get("RFISST_THREADS", "1")))
    except ValueError:
        return 1


class _ScanContext:
    """Per-scan shared state: predictions and DA columns keyed by track identity."""

    def __init__(self, forest, zs, models, bd, scan_index):
        self.zs = zs
        self.models = models
        self.bd = bd
        self.scan_index = scan_index
        self.warnings: list[str] = []
        unique: dict[int, Track] = {}
        for h in forest.hypotheses:
            for t in h.tracks:
                unique.setdefault(id(t), t)
        self.pred: dict[int, Track | None] = {}
        tracks = list(unique.values())
        try:
            out = predict_tracks(tracks, models.dynamics, models.dt)
        except PropagationError:
            out = []
            for t in tracks:
                try:
                    out.append(predict_tracks([t], models.dynamics, models.dt)[0])
                except PropagationError:
                    out.append(None)
        for t, p in zip(tracks, out):
            self.pred[id(t)] = p
        ok = [p for p in out if p is not None]
        self.detectable = dict(zip((id(p) for p in ok), models.detectable_mask(ok)))
        self.births = [_birth_track(bd.birth_partitions, l, birth_label(scan_index, l)) for l in range(bd.n_births)]
        for b in self.births:
            self.detectable[id(b)] = True
        self.clutter = _clutter_column(models.clutter_logdensity, zs) if len(zs) else np.zeros(0)
        self.columns: dict[int, np.ndarray] = {}
        for t in ok + self.births:
            if self.detectable[id(t)]:
                self.columns[id(t)] = self._column(t)

    def _column(self, t: Track) -> np.ndarray:
        m = self.models
        if not len(self.zs):
            return np.zeros(0)
        try:
            ll, d2 = measurement_logliks(t, self.zs, m.measurement)
        except SingularInnovationError:
            self.warnings.append(f"singular innovation for track {t.label}; it cannot be associated")
            return np.full(len(self.zs), -np.inf)
        if m.at_mean:
            ll = loglik_at_mean(t, self.zs, m.measurement)
        if m.gate is not None:
            ll = np.where(d2 > m.gate, -np.inf, ll)
        return ll


def _branch_columns(ctx: _ScanContext, parent: Hypothesis, pred: list[Track]):
    """Undetectable tracks carried through, and (tag, log factor, DA tracks) per branch."""
    det = [p for p in pred if ctx.detectable[id(p)]]
    carried = tuple(p for p in pred if not ctx.detectable[id(p)])
    cands = ctx.bd.death_candidates(det)
    out = []
    for tag, log_factor in spawn_children(parent, len(ctx.zs), ctx.bd, death_candidates=cands):
        cols = det
        if tag.kind is BranchKind.DEATH:
            cols = [p for p in det if p.label != tag.label]
        elif tag.kind is BranchKind.BIRTH:
            cols = det + [ctx.births[tag.partition]]
        out.append((tag, log_factor, cols))
    return carried, out


def _check_enumeration_budget(ctx: _ScanContext, parents, cap: int) -> None:
    """Raise EnumerationCapExceeded if exhaustive enumeration of the whole scan
    (every branch of every parent, after gating) would exceed ``cap`` rows."""
    m = len(ctx.zs)
    total = 0
    for parent in parents:
        pred = [ctx.pred[id(t)] for t in parent.tracks]
        if any(p is None for p in pred):
            continue
        for _, _, cols in _branch_columns(ctx, parent, pred)[1]:
            if m and cols:
                allowed = np.isfinite(np.column_stack([ctx.columns[id(t)] for t in cols]))
            else:
                allowed = np.zeros((m, len(cols)), dtype=bool)
            total += count_feasible(allowed, cap - total)
            if total > cap:
                raise EnumerationCapExceeded(f">{cap} (scan total)", cap, (len(cols), m))


def _expand_parent(ctx: _ScanContext, idx: int, parent: Hypothesis, sampler, weighting: Weighting,
                   seed: int, cap: int):
    """All candidate children of one parent, plus (ns, steps) spent."""
    zs, models = ctx.zs, ctx.models
    m = len(zs)
    pred = [ctx.pred[id(t)] for t in parent.tracks]
    if any(p is None for p in pred):
        return None, 0, 0, (0, 0)
    carried, branch_cols = _branch_columns(ctx, parent, pred)
    t0 = time.perf_counter_ns()
    steps = 0
    largest = (0, 0)
    branches = []
    for b_idx, (tag, log_factor, cols) in enumerate(branch_cols):
        M = len(cols)
        largest = max(largest, (M, count_associations(m, M)))
        rng = _substream(seed, ctx.scan_index, parent.id, b_idx)
        perm = rng.permutation(M)
        cols = [cols[i] for i in perm]
        ll = np.empty((m, M + 1))
        for c, t in enumerate(cols):
            ll[:, c] = ctx.columns[id(t)]
        ll[:, M] = ctx.clutter
        da = DataAssociationMatrix(ll, tuple(t.label for t in cols), tuple(int(i) for i in perm))
        table = child_log_prior_table(m, M, models.pD, log_factor, weighting)
        if sampler is EXHAUSTIVE:
            columns = association_array(da, cap=cap, skip_infeasible=True)
            scores = score_array(columns, da, table)
        else:
            res = sample_columns(da, table, sampler, rng)
            steps += res.steps
            n = min(sampler.max_distinct, len(res))
            columns, scores = res.columns[:n], res.scores[:n]
        keep = np.isfinite(scores)
        lw = parent.log_weight + scores[keep]
        birth = ctx.births[tag.partition] if tag.kind is BranchKind.BIRTH else None
        branches.append(_Branch(idx, tag, da.track_labels, tuple(cols), carried, columns[keep], lw, birth))
    return branches, time.perf_counter_ns() - t0, steps, largest


def _time_update(forest: HypothesisForest, models: TrackerModels, scan_index: int) -> tuple[HypothesisForest, list[str]]:
    out, notes = [], []
    for h in forest.hypotheses:
        try:
            tracks = predict_tracks(h.tracks, models.dynamics, models.dt)
        except PropagationError as exc:
            notes.append(f"dropped hypothesis {h.id}: {exc}")
            continue
        out.append(Hypothesis(h.id, tuple(tracks), h.log_weight, h.lineage))
    if not out:
        raise DegenerateForestError("every hypothesis failed to propagate")
    return HypothesisForest(tuple(out), scan_index), notes


def scan(forest: HypothesisForest, measurements, models: TrackerModels, bd: BirthDeathConfig,
         sampler: SamplerConfig | _Exhaustive, H_inf: int, *, weighting: Weighting = Weighting.HFISST,
         seed: int = 0, threads: int | None = None, cap: int = ENUMERATION_CAP,
         weight_floor: float = WEIGHT_FLOOR, resample: bool = False) -> tuple[HypothesisForest, ScanReport]:
    """One full recursion step.

    ``measurements=None`` means no sensor report: tracks are predicted and
    weights carried over. An empty array is a real scan that saw nothing.
    ``EnumerationCapExceeded`` propagates from EXHAUSTIVE mode.
    """
    if H_inf < 1:
        raise ValueError("H_inf must be >= 1")
    scan_index = forest.scan_index + 1
    if measurements is None:
        new, notes = _time_update(forest, models, scan_index)
        new = prune(new, H_inf)
        return new, _report(new, 0, 0, 0, notes)

    zs = np.asarray(measurements, dtype=float).reshape(-1, models.measurement.H.shape[0])
    ctx = _ScanContext(forest, zs, models, bd, scan_index)
    parents = forest.hypotheses
    if sampler is EXHAUSTIVE:
        _check_enumeration_budget(ctx, parents, cap)
    work = lambda i: _expand_parent(ctx, i, parents[i], sampler, weighting, seed, cap)  # noqa: E731
    n_threads = min(thread_count(threads), len(parents))
    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as pool:
            results = list(pool.map(work, range(len(parents))))
    else:
        results = [work(i) for i in range(len(parents))]

    notes = list(ctx.warnings)
    branches: list[_Branch] = []
    gen_ns = steps = 0
    largest = (0, 0)
    for i, (br, ns, st, big) in enumerate(results):
        if br is None:
            notes.append(f"dropped hypothesis {parents[i].id}: propagation failed")
            continue
        branches.extend(br)
        gen_ns += ns
        steps += st
        largest = max(largest, big)
    if not branches:
        raise DegenerateForestError("no parent hypothesis survived prediction")

    # flat index of (branch, row) pairs with their weights and canonical keys
    sizes = [len(br.log_weights) for br in branches]
    distinct = int(sum(sizes))
    try:
        norm = normalize_log_weights(np.concatenate([br.log_weights for br in branches]))
    except DegenerateForestError:
        notes.append("every child has zero weight; falling back to uniform weights")
        _fallback_children(branches)
        sizes = [len(br.log_weights) for br in branches]
        norm = np.full(sum(sizes), -math.log(sum(sizes)))
    branch_of = np.repeat(np.arange(len(branches)), sizes)
    row_of = np.arange(len(norm)) - np.repeat(np.cumsum(sizes) - sizes, sizes)
    key = lambda i: _child_key(parents, branches[branch_of[i]], row_of[i])  # noqa: E731

    kept = np.flatnonzero(norm >= (math.log(weight_floor) if weight_floor > 0 else -np.inf))
    if not len(kept):
        kept = np.flatnonzero(norm == norm.max())
    by_weight = kept[np.argsort(-norm[kept], kind="stable")]
    if resample and len(by_weight) > H_inf:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(scan_index, 0xF0F0)))
        w = np.exp(normalize_log_weights(norm[by_weight]))
        pick = np.sort(rng.choice(len(by_weight), size=H_inf, replace=False, p=w))
        order = [int(by_weight[i]) for i in pick]
    else:
        # canonical keys are only needed for children tied with the one at the cut
        cut = norm[by_weight[min(H_inf, len(by_weight)) - 1]]
        contenders = by_weight[norm[by_weight] >= cut]
        order = sorted((int(i) for i in contenders), key=lambda i: (-norm[i], key(i)))[:H_inf]

    cache: dict = {}
    children = []
    for rank, i in enumerate(order):
        child = _materialize(branches[branch_of[i]], row_of[i], zs, models, parents, cache, f"{scan_index}:{rank}", float(norm[i]))
        if child is None:
            notes.append(f"dropped child {key(i)}: singular innovation")
            continue
        children.append(child)
    if not children:
        raise DegenerateForestError("every surviving child failed to update")
    lw_kept = normalize_log_weights([h.log_weight for h in children])
    new = HypothesisForest(tuple(h.with_log_weight(float(v)) for h, v in zip(children, lw_kept)), scan_index)
    return new, _report(new, gen_ns, steps, distinct, notes, largest)


def _child_key(parents, br: _Branch, r: int):
    return (parents[br.parent].id, br.tag.key, tuple(
        CLUTTER if c == len(br.labels) else br.labels[c] for c in br.columns[r]))


def _fallback_children(branches) -> None:
    """Give every surviving association equal weight; if none survived, keep
    each branch's all-clutter child."""
    if not any(len(br.columns) for br in branches):
        for br in branches:
            m = br.columns.shape[1] if br.columns.ndim == 2 else 0
            br.columns = np.full((1, m), len(br.labels), dtype=np.int64)
    for br in branches:
        br.log_weights = np.zeros(len(br.columns))


def _materialize(br: _Branch, r: int, zs, models: TrackerModels, parents, cache, new_id: str,
                 log_weight: float) -> Hypothesis | None:
    cols = br.columns[r]
    M = len(br.labels)
    updated: dict[str, Track] = {}
    try:
        for i, c in enumerate(cols):
            if c == M:
                continue
            t = br.tracks[c]
            key = (t, i)
            if key not in cache:
                cache[key] = update_track(t, zs[i], models.measurement)
            updated[t.label] = cache[key][0]
    except SingularInnovationError:
        return None
    parent = parents[br.parent]
    pred_by_label = {t.label: t for t in br.tracks + br.carried}
    tracks = [updated.get(t.label, pred_by_label[t.label]) for t in parent.tracks if t.label in pred_by_label]
    if br.birth is not None:
        tracks.append(updated.get(br.birth.label, br.birth))
    assoc = AssociationMap(tuple(CLUTTER if c == M else br.labels[c] for c in cols))
    return Hypothesis(new_id, tuple(tracks), log_weight, Lineage(parent.id, br.tag, assoc))


def _report(forest: HypothesisForest, gen_ns: int, steps: int, distinct: int, notes,
            largest=(0, 0)) -> ScanReport:
    return ScanReport(
        scan_index=forest.scan_index,
        hypothesis_count=len(forest),
        hypothesis_ids=tuple(h.id for h in forest.hypotheses),
        weights=forest.weights,
        cardinality=expected_object_count(forest),
        generation_ns=gen_ns,
        mcmc_steps=steps,
        distinct_children=distinct,
        largest_branch=largest,
        warnings=list(notes),
    )
