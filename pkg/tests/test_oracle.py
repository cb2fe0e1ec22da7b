import math

import numpy as np
import pytest

from rfisst.core import CLUTTER
from rfisst.oracle import (
    FisstComponent,
    Gaussian,
    OracleSizeError,
    brute_force_posterior,
    fisst_two_target_update,
    info_update,
)
from rfisst.engine import BirthDeathConfig
from rfisst.gaussian import MeasurementModel
from rfisst.validation import fisst_check, random_instance


def test_info_update_integral_by_monte_carlo():
    rng = np.random.default_rng(0)
    g = Gaussian(np.array([1.0, -1.0]), np.array([[2.0, 0.3], [0.3, 1.0]]))
    H, R = np.eye(2), 0.5 * np.eye(2)
    z = np.array([0.5, 0.2])
    _, log_int = info_update(g, z, H, R)
    xs = rng.multivariate_normal(g.mean, g.cov, 400_000)
    d = z - xs
    dens = np.exp(-0.5 * np.sum(d * d, axis=1) / 0.5) / (2 * math.pi * 0.5)
    assert abs(math.log(dens.mean()) - log_int) < 5e-3


@pytest.mark.parametrize("seed", range(10))
def test_two_target_fisst_agrees_with_engine(seed):
    tv, classes, mean_err = fisst_check(np.random.default_rng(seed))
    assert tv < 1e-10 and classes == 7 and mean_err < 1e-8


def test_two_target_association_classes():
    rng = np.random.default_rng(1)
    forest, zs, models = random_instance(rng, 2, 2)
    comp = FisstComponent(1.0, tuple(Gaussian(t.mean, t.covariance) for t in forest.hypotheses[0].tracks))
    out = fisst_two_target_update([comp], zs[0], zs[1], models.pD, math.exp(models.clutter_logdensity), models)
    assocs = {c.association for c in out}
    assert assocs == {(0, 1), (1, 0), (0, None), (None, 0), (1, None), (None, 1), (None, None)}
    assert math.isclose(sum(c.weight for c in out), 1.0)


def test_brute_force_keys_and_normalization():
    rng = np.random.default_rng(2)
    forest, zs, models = random_instance(rng, 2, 1)
    post = brute_force_posterior(forest, zs, models, BirthDeathConfig())
    assert len(post) == 3
    assert ("0:0", "N", (CLUTTER,)) in post
    assert math.isclose(sum(post.values()), 1.0)


def test_brute_force_cap():
    rng = np.random.default_rng(3)
    forest, zs, models = random_instance(rng, 4, 3)
    with pytest.raises(OracleSizeError):
        brute_force_posterior(forest, zs, models, BirthDeathConfig(), cap=10)
