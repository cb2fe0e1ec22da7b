"""Data associations between one scan's measurements and a hypothesis' tracks.

Columns of the data-association (DA) matrix are tracks followed by a final
clutter column; rows are measurements. An association is encoded as a vector
of column indices, one per measurement, where the clutter column may repeat
and every track column appears at most once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numba
import numpy as np

from .core import CLUTTER, AssociationMap, Track
from .gaussian import MeasurementModel, loglik_at_mean, measurement_logliks

ENUMERATION_CAP = 5_000_000
GATE_DEFAULT = 25.0


class EnumerationCapExceeded(RuntimeError):
    """Exhaustive enumeration would exceed the configured cap."""

    def __init__(self, count, cap, size: tuple[int, int] | None = None):
        super().__init__(f"exhaustive enumeration infeasible: {count} associations exceed cap {cap}")
        self.count = count
        self.cap = cap
        self.size = size  # (M, m) of the offending problem when known


def count_associations(m: int, M: int) -> int:
    """Number of one-to-one partial assignments of m measurements to M tracks."""
    if m < 0 or M < 0:
        raise ValueError("counts must be non-negative")
    return sum(math.comb(M, n) * math.comb(m, n) * math.factorial(n) for n in range(min(m, M) + 1))


@dataclass(frozen=True)
class DataAssociationMatrix:
    loglik: np.ndarray
    track_labels: tuple[str, ...]
    permutation: tuple[int, ...] = ()
    maha: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.loglik.shape[0]

    @property
    def M(self) -> int:
        return len(self.track_labels)

    @property
    def clutter_column(self) -> int:
        return self.M

    def to_map(self, columns: Sequence[int]) -> AssociationMap:
        return AssociationMap.from_columns(columns, self.track_labels)


def _clutter_column(clutter_logdensity, zs: np.ndarray) -> np.ndarray:
    if callable(clutter_logdensity):
        out = clutter_logdensity(zs)
    else:
        out = clutter_logdensity
    return np.broadcast_to(np.asarray(out, dtype=float), (len(zs),)).copy()


def build_da_matrix(
    tracks: Sequence[Track],
    measurements,
    meas: MeasurementModel,
    clutter_logdensity: float | np.ndarray | Callable[[np.ndarray], np.ndarray],
    rng: np.random.Generator | None = None,
    gate: float | None = None,
    at_mean: bool = False,
) -> DataAssociationMatrix:
    """Fill the m x (M+1) table of per-pair log-likelihoods.

    With ``rng`` the track columns are shuffled and the permutation recorded
    (``permutation[c]`` is the input index of the track in column c). With
    ``gate`` entries whose squared innovation distance exceeds it become -inf.
    ``at_mean`` swaps the marginal likelihood for N(z; h(mean), R).
    """
    zs = np.asarray(measurements, dtype=float).reshape(-1, meas.H.shape[0])
    tracks = list(tracks)
    m, M = len(zs), len(tracks)
    perm = np.arange(M) if rng is None else rng.permutation(M)
    ll = np.empty((m, M + 1))
    maha = np.empty((m, M))
    for c, idx in enumerate(perm):
        col, d2 = measurement_logliks(tracks[idx], zs, meas)
        if at_mean:
            col = loglik_at_mean(tracks[idx], zs, meas)
        ll[:, c] = col
        maha[:, c] = d2
    if gate is not None and m and M:
        ll[:, :M] = np.where(maha > gate, -np.inf, ll[:, :M])
    ll[:, M] = _clutter_column(clutter_logdensity, zs)
    labels = tuple(tracks[i].label for i in perm)
    return DataAssociationMatrix(ll, labels, tuple(int(i) for i in perm), maha)


def apply_move(columns: Sequence[int], row: int, col: int, n_tracks: int) -> tuple[int, ...]:
    """Reassign ``row`` to ``col``; a previous owner of that track drops to clutter."""
    out = list(columns)
    if col != n_tracks:
        for r, c in enumerate(out):
            if c == col and r != row:
                out[r] = n_tracks
    out[row] = col
    return tuple(out)


def propose(columns: Sequence[int], n_tracks: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Uniform row, uniform column over the M tracks plus clutter."""
    if not columns:
        raise ValueError("cannot propose a move with no measurements")
    row = int(rng.integers(len(columns)))
    col = int(rng.integers(n_tracks + 1))
    return apply_move(columns, row, col, n_tracks)


def _check_map(da: DataAssociationMatrix, columns: Sequence[int]) -> None:
    if len(columns) != da.m:
        raise ValueError(f"association has {len(columns)} entries, matrix has {da.m} rows")


def association_logscore(a: AssociationMap | Sequence[int], da: DataAssociationMatrix, log_prior: np.ndarray) -> float:
    """log p_ij + sum of looked-up DA entries (the sampler's target, up to a constant)."""
    columns = a.columns(da.track_labels) if isinstance(a, AssociationMap) else tuple(a)
    _check_map(da, columns)
    k = sum(1 for c in columns if c != da.M)
    total = float(log_prior[k])
    for i, c in enumerate(columns):
        total += float(da.loglik[i, c])
    return total


def enumerate_columns(m: int, M: int, allowed: np.ndarray | None = None,
                      cap: int = ENUMERATION_CAP) -> Iterator[tuple[int, ...]]:
    """Every valid assignment vector in lexicographic order.

    ``allowed`` (m x M boolean) removes gated pairs; without it the cap is
    checked up front against the closed-form count.
    """
    if allowed is None:
        count = count_associations(m, M)
        if count > cap:
            raise EnumerationCapExceeded(count, cap)
    if m == 0:
        yield ()
        return
    used = [False] * M
    current = [0] * m
    choice = [-1] * m  # last column tried per row
    row = 0
    produced = 0
    while row >= 0:
        c = choice[row]
        if c >= 0 and c < M:
            used[c] = False
        c += 1
        while c < M and (used[c] or (allowed is not None and not allowed[row, c])):
            c += 1
        if c > M:
            choice[row] = -1
            row -= 1
            continue
        choice[row] = c
        current[row] = c
        if c < M:
            used[c] = True
        if row == m - 1:
            produced += 1
            if produced > cap:
                raise EnumerationCapExceeded(f">{cap}", cap)
            yield tuple(current)
        else:
            row += 1


def enumerate_associations(m: int, M: int, labels: Sequence[str] | None = None,
                           cap: int = ENUMERATION_CAP) -> Iterator[AssociationMap]:
    labels = tuple(labels) if labels is not None else tuple(f"T{j + 1}" for j in range(M))
    if len(labels) != M:
        raise ValueError("need one label per track")
    for cols in enumerate_columns(m, M, cap=cap):
        yield AssociationMap.from_columns(cols, labels)


@numba.njit(cache=True, nogil=True)
def _count_feasible(allowed, cap):
    m, M = allowed.shape
    used = np.zeros(M, dtype=np.bool_)
    choice = np.full(m, -1, dtype=np.int64)
    row = 0
    count = 0
    if m == 0:
        return 1
    while row >= 0:
        c = choice[row]
        if c >= 0 and c < M:
            used[c] = False
        c += 1
        while c < M and (used[c] or not allowed[row, c]):
            c += 1
        if c > M:
            choice[row] = -1
            row -= 1
            continue
        choice[row] = c
        if c < M:
            used[c] = True
        if row == m - 1:
            count += 1
            if count > cap:
                return count
        else:
            row += 1
    return count


def count_feasible(allowed: np.ndarray, cap: int = ENUMERATION_CAP) -> int:
    """Number of associations that avoid every disallowed (gated) pair.

    Counting stops early: any value above ``cap`` means "more than cap".
    """
    allowed = np.ascontiguousarray(allowed, dtype=np.bool_)
    return int(_count_feasible(allowed, cap))


@numba.njit(cache=True, nogil=True)
def _fill_columns(allowed, out):
    m, M = allowed.shape
    used = np.zeros(M, dtype=np.bool_)
    choice = np.full(m, -1, dtype=np.int64)
    row = 0
    n = 0
    while row >= 0:
        c = choice[row]
        if c >= 0 and c < M:
            used[c] = False
        c += 1
        while c < M and (used[c] or not allowed[row, c]):
            c += 1
        if c > M:
            choice[row] = -1
            row -= 1
            continue
        choice[row] = c
        if c < M:
            used[c] = True
        if row == m - 1:
            for r in range(m - 1):
                out[n, r] = choice[r]
            out[n, m - 1] = c
            n += 1
        else:
            row += 1
    return n


def association_array(da: DataAssociationMatrix, cap: int = ENUMERATION_CAP, skip_infeasible: bool = True) -> np.ndarray:
    """All associations as an (A, m) array, lexicographic order.

    With ``skip_infeasible`` pairs whose entry is -inf (gated) are never
    generated; the cap applies to the number actually generated.
    """
    m, M = da.m, da.M
    if m == 0:
        return np.zeros((1, 0), dtype=np.int64)
    if skip_infeasible:
        allowed = np.isfinite(da.loglik[:, :M])
        count = count_feasible(allowed, cap)
        if count > cap:
            raise EnumerationCapExceeded(f">{cap}", cap, (M, m))
    else:
        allowed = np.ones((m, M), dtype=np.bool_)
        count = count_associations(m, M)
        if count > cap:
            raise EnumerationCapExceeded(count, cap, (M, m))
    out = np.empty((count, m), dtype=np.int64)
    _fill_columns(allowed, out)
    return out


def score_array(columns: np.ndarray, da: DataAssociationMatrix, log_prior: np.ndarray) -> np.ndarray:
    """Vectorized association_logscore over an (A, m) array of assignment vectors."""
    if columns.shape[1] == 0:
        return np.full(len(columns), float(log_prior[0]))
    rows = np.arange(da.m)
    k = np.sum(columns != da.M, axis=1)
    return log_prior[k] + np.sum(da.loglik[rows[None, :], columns], axis=1)


@dataclass(frozen=True)
class SamplerConfig:
    burn_in: int = 10_000
    post_burn_steps: int = 90_000
    max_distinct: int = 10
    seed: int = 0
    record_proposals: bool = True

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.post_burn_steps < 1:
            raise ValueError("post_burn_steps must be >= 1")
        if self.max_distinct < 1:
            raise ValueError("max_distinct must be >= 1")

    @property
    def total_steps(self) -> int:
        return self.burn_in + self.post_burn_steps


@dataclass(frozen=True)
class ChainResult:
    """Distinct post-burn-in states, best first.

    ``visits`` counts chain steps spent in each state; states that were only
    proposed (never accepted) have zero visits.
    """

    columns: np.ndarray  # (n, m)
    scores: np.ndarray
    visits: np.ndarray
    steps: int
    accepted: int

    def __len__(self):
        return len(self.scores)


_ZOBRIST_SEED = 0x5EED_F155


def _zobrist(m: int, ncol: int) -> np.ndarray:
    rng = np.random.default_rng(_ZOBRIST_SEED)
    return rng.integers(0, np.iinfo(np.int64).max, size=(m, ncol), dtype=np.int64, endpoint=True)


@numba.njit(cache=True, nogil=True)
def _full_score(ll, log_prior, cur, M):
    k = 0
    s = 0.0
    for i in range(cur.shape[0]):
        if cur[i] != M:
            k += 1
        s += ll[i, cur[i]]
    return s + log_prior[k], k


@numba.njit(cache=True, nogil=True)
def _offer(best, best_score, best_hash, n_best, cand, score, h):
    """Keep the len(best) highest-scoring distinct states seen so far."""
    if score == -np.inf:
        return n_best
    for b in range(n_best):
        if best_hash[b] == h:
            return n_best
    C = best.shape[0]
    if n_best < C:
        slot = n_best
        n_best += 1
    else:
        slot = 0
        for b in range(1, C):
            if best_score[b] < best_score[slot]:
                slot = b
        if score <= best_score[slot]:
            return n_best
    for r in range(cand.shape[0]):
        best[slot, r] = cand[r]
    best_score[slot] = score
    best_hash[slot] = h
    return n_best


@numba.njit(cache=True, nogil=True)
def _chain_kernel(ll, log_prior, cols0, rows, cols, u, burn_in, zob, n_keep):
    m, ncol = ll.shape
    M = ncol - 1
    total = rows.shape[0]
    cur = cols0.copy()
    owner = np.full(M, -1, dtype=np.int64)
    h = np.int64(0)
    for i in range(m):
        if cur[i] != M:
            owner[cur[i]] = i
        h ^= zob[i, cur[i]]
    score, k = _full_score(ll, log_prior, cur, M)
    post = total - burn_in
    rec_states = np.empty((post, m), dtype=np.int64)
    rec_hash = np.empty(post, dtype=np.int64)
    rec_step = np.empty(post, dtype=np.int64)
    n_rec = 0
    n_acc = 0
    scratch = np.empty(m, dtype=np.int64)
    # best distinct proposals after burn-in (n_keep = 0 disables)
    best = np.empty((n_keep, m), dtype=np.int64)
    best_score = np.full(n_keep, -np.inf)
    best_hash = np.zeros(n_keep, dtype=np.int64)
    n_best = 0
    for s in range(total):
        i = rows[s]
        j = cols[s]
        old = cur[i]
        changed = False
        if j != old:
            i2 = -1
            if j == M:
                newk = k - 1
                dll = ll[i, M] - ll[i, old]
            else:
                i2 = owner[j]
                newk = k
                if old == M:
                    newk += 1
                dll = ll[i, j] - ll[i, old]
                if i2 >= 0:
                    newk -= 1
                    dll += ll[i2, M] - ll[i2, j]
            if score == -np.inf:
                for r in range(m):
                    scratch[r] = cur[r]
                scratch[i] = j
                if i2 >= 0:
                    scratch[i2] = M
                new_score, newk = _full_score(ll, log_prior, scratch, M)
            else:
                new_score = score + dll + (log_prior[newk] - log_prior[k])
            if n_keep > 0 and s >= burn_in and (n_best < n_keep or new_score > best_score.min()):
                for r in range(m):
                    scratch[r] = cur[r]
                scratch[i] = j
                h_new = h ^ zob[i, old] ^ zob[i, j]
                if i2 >= 0:
                    scratch[i2] = M
                    h_new ^= zob[i2, j] ^ zob[i2, M]
                n_best = _offer(best, best_score, best_hash, n_best, scratch, new_score, h_new)
            accept = new_score >= score
            if not accept:
                accept = u[s] < np.exp(new_score - score)
            if accept:
                cur[i] = j
                h ^= zob[i, old] ^ zob[i, j]
                if old != M:
                    owner[old] = -1
                if j != M:
                    if i2 >= 0:
                        cur[i2] = M
                        h ^= zob[i2, j] ^ zob[i2, M]
                    owner[j] = i
                score, k = _full_score(ll, log_prior, cur, M)
                n_acc += 1
                changed = True
        if s >= burn_in and (changed or s == burn_in):
            for r in range(m):
                rec_states[n_rec, r] = cur[r]
            rec_hash[n_rec] = h
            rec_step[n_rec] = s
            n_rec += 1
    return rec_states[:n_rec], rec_hash[:n_rec], rec_step[:n_rec], n_acc, best[:n_best], best_hash[:n_best]


def greedy_start(da: DataAssociationMatrix) -> np.ndarray:
    """Row by row, take the best still-free column (clutter always free)."""
    M = da.M
    used = np.zeros(M, dtype=bool)
    start = np.full(da.m, M, dtype=np.int64)
    for i in range(da.m):
        row = da.loglik[i]
        best, best_val = M, row[M]
        for c in range(M):
            if not used[c] and row[c] > best_val:
                best, best_val = c, row[c]
        start[i] = best
        if best != M:
            used[best] = True
    return start


def _sort_states(columns: np.ndarray, scores: np.ndarray) -> np.ndarray:
    # best score first; ties by lexicographic assignment vector
    keys = [columns[:, r] for r in range(columns.shape[1] - 1, -1, -1)] + [-scores]
    return np.lexsort(keys)


def sample_columns(da: DataAssociationMatrix, log_prior: np.ndarray, cfg: SamplerConfig,
                   rng: np.random.Generator | None = None, start: np.ndarray | None = None) -> ChainResult:
    """Run the Metropolis chain and return the distinct post-burn-in states.

    Those are every visited state plus, with ``cfg.record_proposals``, the
    ``max_distinct`` best distinct states proposed after burn-in. Proposals
    never change the chain's path, only what is collected.
    """
    m, M = da.m, da.M
    log_prior = np.asarray(log_prior, dtype=float)
    if m == 0:
        return ChainResult(np.zeros((1, 0), dtype=np.int64), np.array([float(log_prior[0])]),
                           np.array([cfg.post_burn_steps]), 0, 0)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    total = cfg.total_steps
    rows = rng.integers(0, m, size=total, dtype=np.int64)
    cols = rng.integers(0, M + 1, size=total, dtype=np.int64)
    u = rng.random(total)
    cols0 = greedy_start(da) if start is None else np.asarray(start, dtype=np.int64)
    lp = np.full(m + 1, -np.inf)
    lp[: len(log_prior)] = log_prior[: m + 1]
    n_keep = cfg.max_distinct if cfg.record_proposals else 0
    states, hashes, steps, n_acc, best, best_hash = _chain_kernel(
        np.ascontiguousarray(da.loglik), lp, cols0, rows, cols, u, cfg.burn_in, _zobrist(m, M + 1), n_keep)
    durations = np.diff(np.append(steps, total))
    uniq, first, inverse = np.unique(hashes, return_index=True, return_inverse=True)
    visits = np.bincount(inverse.reshape(-1), weights=durations, minlength=len(uniq)).astype(np.int64)
    distinct = states[first]
    extra = ~np.isin(best_hash, uniq)
    if np.any(extra):
        distinct = np.concatenate([distinct, best[extra]])
        visits = np.concatenate([visits, np.zeros(int(extra.sum()), dtype=np.int64)])
    scores = score_array(distinct, da, lp)
    order = _sort_states(distinct, scores)
    return ChainResult(distinct[order], scores[order], visits[order], total, int(n_acc))


def mcmc_sample(da: DataAssociationMatrix, log_prior: np.ndarray, cfg: SamplerConfig,
                rng: np.random.Generator | None = None) -> list[tuple[AssociationMap, float]]:
    """Up to ``cfg.max_distinct`` best distinct associations found by the chain."""
    res = sample_columns(da, log_prior, cfg, rng)
    n = min(cfg.max_distinct, len(res))
    return [(da.to_map(res.columns[i]), float(res.scores[i])) for i in range(n)]
