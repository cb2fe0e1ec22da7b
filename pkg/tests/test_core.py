import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rfisst.core import (
    CLUTTER,
    AssociationMap,
    BranchTag,
    DegenerateForestError,
    Hypothesis,
    HypothesisForest,
    Lineage,
    Track,
    canonical_key,
    enforce_psd,
    normalize_log_weights,
    normalize_weights,
    uniform_forest,
)


def _track(label="T0"):
    return Track(label, np.zeros(4), np.eye(4))


def test_track_arrays_are_frozen():
    t = _track()
    with pytest.raises(ValueError):
        t.mean[0] = 1.0


def test_track_shape_mismatch():
    with pytest.raises(ValueError):
        Track("x", np.zeros(4), np.eye(3))


def test_duplicate_labels_rejected():
    with pytest.raises(ValueError):
        Hypothesis("h", (_track("a"), _track("a")))


def test_association_map_rejects_double_use():
    with pytest.raises(ValueError):
        AssociationMap(("T1", "T1"))
    assert AssociationMap((CLUTTER, CLUTTER)).k == 0


@given(st.lists(st.integers(0, 3), min_size=0, max_size=4))
def test_columns_roundtrip(cols):
    labels = ("a", "b", "c")
    used = [c for c in cols if c != 3]
    if len(used) != len(set(used)):
        return
    a = AssociationMap.from_columns(cols, labels)
    assert a.columns(labels) == tuple(cols)
    assert a.k == len(used) and a.m == len(cols)


def test_branch_tag_validation_and_keys():
    assert BranchTag().key == "N"
    assert BranchTag.birth(2).key == "B2"
    assert BranchTag.death("T3").key == "D:T3"
    with pytest.raises(ValueError):
        BranchTag.birth(-1)


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=20))
def test_normalize_log_weights_sums_to_one(lw):
    out = normalize_log_weights(lw)
    assert math.isclose(float(np.sum(np.exp(out))), 1.0, abs_tol=1e-12)
    np.testing.assert_allclose(np.diff(out), np.diff(lw), atol=1e-9)


def test_normalize_degenerate():
    with pytest.raises(DegenerateForestError):
        normalize_log_weights([-math.inf, -math.inf])
    with pytest.raises(ValueError):
        normalize_log_weights([math.nan])


def test_forest_top_and_normalize():
    hs = [Hypothesis(f"0:{i}", (_track(),), lw) for i, lw in enumerate([0.0, 2.0, 1.0])]
    f = normalize_weights(HypothesisForest(tuple(hs)))
    assert f.top().id == "0:1"
    assert math.isclose(f.weights.sum(), 1.0)
    u = uniform_forest(hs)
    np.testing.assert_allclose(u.weights, 1 / 3)
    with pytest.raises(ValueError):
        HypothesisForest(())


def test_canonical_key():
    h = Hypothesis("1:0", (), 0.0, Lineage("0:0", BranchTag.death("T1"), AssociationMap((CLUTTER,))))
    assert canonical_key(h) == ("0:0", "D:T1", (CLUTTER,))


def test_enforce_psd():
    a = np.array([[1.0, 1.0], [1.0, 1.0 - 1e-12]])
    out = enforce_psd(a)
    assert np.linalg.eigvalsh(out)[0] >= 0
    with pytest.raises(ValueError):
        enforce_psd(np.diag([1.0, -1.0]))
