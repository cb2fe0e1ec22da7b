import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rfisst.association import enumerate_columns

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def chain_transition_matrix(da, log_prior):
    """Exact transition matrix of the sampler's Metropolis chain on one DA matrix.

    Uniform row, uniform column over M tracks plus clutter, accept with
    min(1, exp(score difference)) and no Hastings correction, which is what
    the kernel does.
    """
    from rfisst.association import apply_move, association_logscore

    states = list(enumerate_columns(da.m, da.M))
    index = {s: i for i, s in enumerate(states)}
    scores = np.array([association_logscore(s, da, log_prior) for s in states])
    n = len(states)
    P = np.zeros((n, n))
    q = 1.0 / (da.m * (da.M + 1))
    for i, s in enumerate(states):
        for r in range(da.m):
            for c in range(da.M + 1):
                j = index[apply_move(s, r, c, da.M)]
                if j == i:
                    P[i, i] += q
                    continue
                a = 1.0 if scores[j] >= scores[i] else math.exp(scores[j] - scores[i])
                P[i, j] += q * a
                P[i, i] += q * (1.0 - a)
    return states, scores, P


def stationary(P):
    w, v = np.linalg.eig(P.T)
    pi = np.real(v[:, np.argmin(np.abs(w - 1.0))])
    return pi / pi.sum()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
