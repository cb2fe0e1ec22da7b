"""Domain types shared by every part of the tracker.

A hypothesis is one complete explanation of the world: a set of labeled
single-object Gaussian beliefs plus the lineage (parent, birth/death branch,
data association) that produced it. Weights are kept as natural logs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

CLUTTER = "<clutter>"

PSD_TOLERANCE = 1e-9


class DegenerateForestError(ValueError):
    """Every hypothesis in a forest carries zero probability."""


def enforce_psd(cov: np.ndarray) -> np.ndarray:
    """Symmetrize ``cov`` and clamp small negative eigenvalues to zero.

    Raises ``ValueError`` if an eigenvalue is more negative than
    ``PSD_TOLERANCE * trace``.
    """
    cov = 0.5 * (cov + cov.T)
    evals = np.linalg.eigvalsh(cov)
    if evals[0] >= 0.0:
        return cov
    scale = max(abs(float(np.trace(cov))), 1.0)
    if evals[0] < -PSD_TOLERANCE * scale:
        raise ValueError(f"covariance is not positive semi-definite (min eigenvalue {evals[0]:.3e})")
    evals, evecs = np.linalg.eigh(cov)
    cov = (evecs * np.clip(evals, 0.0, None)) @ evecs.T
    return 0.5 * (cov + cov.T)


def _frozen_array(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Track:
    """Labeled Gaussian belief over one object's state.

    Compared by identity so tracks can key per-scan caches; two hypotheses
    that share an un-updated track share the same object.
    """

    label: str
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = _frozen_array(self.mean).reshape(-1)
        cov = _frozen_array(self.covariance)
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match state size {mean.size}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def position(self) -> np.ndarray:
        return self.mean[:2]


class BranchKind(enum.Enum):
    NO_BIRTH_DEATH = "N"
    BIRTH = "B"
    DEATH = "D"


@dataclass(frozen=True)
class BranchTag:
    """Which birth/death event separates a child from its parent."""

    kind: BranchKind = BranchKind.NO_BIRTH_DEATH
    partition: int | None = None
    label: str | None = None

    def __post_init__(self):
        if self.kind is BranchKind.BIRTH and (self.partition is None or self.partition < 0):
            raise ValueError("BIRTH branch needs a non-negative partition index")
        if self.kind is BranchKind.DEATH and self.label is None:
            raise ValueError("DEATH branch needs the label of the dying track")

    @classmethod
    def birth(cls, partition: int) -> "BranchTag":
        return cls(BranchKind.BIRTH, partition=partition)

    @classmethod
    def death(cls, label: str) -> "BranchTag":
        return cls(BranchKind.DEATH, label=label)

    @property
    def key(self) -> str:
        if self.kind is BranchKind.BIRTH:
            return f"B{self.partition}"
        if self.kind is BranchKind.DEATH:
            return f"D:{self.label}"
        return "N"


NO_BIRTH_DEATH = BranchTag()


@dataclass(frozen=True)
class AssociationMap:
    """Measurement-slot -> track label (or ``CLUTTER``) assignment.

    The position in ``assignments`` is the measurement index, so the order is
    semantic. A measurement that feeds a birthed track simply names that
    track's label.
    """

    assignments: tuple[str, ...] = ()

    def __post_init__(self):
        assigned = [a for a in self.assignments if a != CLUTTER]
        if len(assigned) != len(set(assigned)):
            raise ValueError(f"track assigned to more than one measurement: {self.assignments}")

    @property
    def k(self) -> int:
        return sum(1 for a in self.assignments if a != CLUTTER)

    @property
    def m(self) -> int:
        return len(self.assignments)

    @classmethod
    def from_columns(cls, columns: Sequence[int], labels: Sequence[str]) -> "AssociationMap":
        """Build from DA-matrix column indices; ``len(labels)`` is the clutter column."""
        n = len(labels)
        return cls(tuple(CLUTTER if c == n else labels[c] for c in columns))

    def columns(self, labels: Sequence[str]) -> tuple[int, ...]:
        index = {lab: i for i, lab in enumerate(labels)}
        n = len(labels)
        return tuple(n if a == CLUTTER else index[a] for a in self.assignments)


@dataclass(frozen=True)
class Lineage:
    parent_id: str
    tag: BranchTag = NO_BIRTH_DEATH
    association: AssociationMap = AssociationMap()


@dataclass(frozen=True, eq=False)
class Hypothesis:
    id: str
    tracks: tuple[Track, ...]
    log_weight: float = 0.0
    lineage: Lineage | None = None

    def __post_init__(self):
        tracks = tuple(self.tracks)
        labels = [t.label for t in tracks]
        if len(labels) != len(set(labels)):
            raise ValueError(f"duplicate track labels in hypothesis {self.id}: {labels}")
        object.__setattr__(self, "tracks", tracks)

    @property
    def weight(self) -> float:
        return math.exp(self.log_weight)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(t.label for t in self.tracks)

    def track(self, label: str) -> Track:
        for t in self.tracks:
            if t.label == label:
                return t
        raise KeyError(label)

    def with_log_weight(self, log_weight: float) -> "Hypothesis":
        return replace(self, log_weight=log_weight)


@dataclass(frozen=True)
class HypothesisForest:
    hypotheses: tuple[Hypothesis, ...]
    scan_index: int = 0

    def __post_init__(self):
        hyps = tuple(self.hypotheses)
        if not hyps:
            raise ValueError("a forest needs at least one hypothesis")
        object.__setattr__(self, "hypotheses", hyps)

    def __len__(self) -> int:
        return len(self.hypotheses)

    def __iter__(self):
        return iter(self.hypotheses)

    @property
    def log_weights(self) -> np.ndarray:
        return np.array([h.log_weight for h in self.hypotheses])

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def top(self) -> Hypothesis:
        # ties go to the smallest canonical key
        return min(self.hypotheses, key=lambda h: (-h.log_weight, canonical_key(h)))


def normalize_log_weights(log_weights: Iterable[float]) -> np.ndarray:
    """Return log-weights shifted so that their exponentials sum to one."""
    lw = np.asarray(list(log_weights) if not isinstance(log_weights, np.ndarray) else log_weights, dtype=float)
    if lw.size == 0:
        raise DegenerateForestError("no weights to normalize")
    top = np.max(lw)
    if not np.isfinite(top):
        if top == -np.inf:
            raise DegenerateForestError("all log-weights are -inf")
        raise ValueError(f"invalid log-weight {top}")
    shifted = lw - top
    return shifted - math.log(float(np.sum(np.exp(shifted))))


def normalize_weights(forest: HypothesisForest) -> HypothesisForest:
    lw = normalize_log_weights(forest.log_weights)
    hyps = tuple(h.with_log_weight(float(w)) for h, w in zip(forest.hypotheses, lw))
    return HypothesisForest(hyps, forest.scan_index)


def canonical_key(h: Hypothesis) -> tuple[str, str, tuple[str, ...]]:
    """Identity of a hypothesis by lineage: parent id, branch and association."""
    if h.lineage is None:
        return ("", "root:" + h.id, ())
    lin = h.lineage
    return (lin.parent_id, lin.tag.key, lin.association.assignments)


def uniform_forest(hypotheses: Sequence[Hypothesis], scan_index: int = 0) -> HypothesisForest:
    lw = -math.log(len(hypotheses))
    return HypothesisForest(tuple(h.with_log_weight(lw) for h in hypotheses), scan_index)
