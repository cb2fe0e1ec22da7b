"""Single-object extended Kalman filter.

Prediction pushes a Gaussian through the dynamics flow (Jacobian at the prior
mean), the update is the standard Kalman step, and the marginal measurement
likelihood uses the innovation covariance S = H P H' + R, i.e. the closed form
of the integral of p(z|x) against the predicted belief.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Track, enforce_psd

LOG_2PI = math.log(2.0 * math.pi)


class PropagationError(RuntimeError):
    """Raised when a propagated state is non-finite or physically invalid."""


class SingularInnovationError(np.linalg.LinAlgError):
    pass


class DynamicsModel:
    """State transition over ``dt`` seconds.

    Subclasses implement ``propagate`` for a batch of states with shape
    ``(..., n)``. The Jacobian defaults to central finite differences of the
    flow with a relative step.
    """

    fd_relative_step = 1e-6

    def propagate(self, states: np.ndarray, dt: float) -> np.ndarray:
        raise NotImplementedError

    def process_noise(self, dt: float) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, state: np.ndarray, dt: float) -> np.ndarray:
        return self.jacobians(np.asarray(state, dtype=float)[None, :], dt)[0]

    def jacobians(self, states: np.ndarray, dt: float) -> np.ndarray:
        """Finite-difference Jacobians for a batch of states, shape (b, n, n)."""
        states = np.asarray(states, dtype=float)
        b, n = states.shape
        steps = self.fd_relative_step * np.maximum(np.abs(states), 1.0)
        eye = np.eye(n)
        # (b, 2n, n): +h_j then -h_j perturbations for every coordinate j
        offsets = steps[:, None, :] * eye[None, :, :]
        pert = np.concatenate([states[:, None, :] + offsets, states[:, None, :] - offsets], axis=1)
        out = self.propagate(pert.reshape(-1, n), dt).reshape(b, 2 * n, n)
        diff = (out[:, :n, :] - out[:, n:, :]) / (2.0 * steps[:, :, None])
        # diff[b, j, i] = d f_i / d x_j
        return np.transpose(diff, (0, 2, 1))


@dataclass(frozen=True)
class LinearDynamics(DynamicsModel):
    """x' = F(dt) x with process noise Q(dt); handy for tests and oracles."""

    transition: Callable[[float], np.ndarray]
    noise: Callable[[float], np.ndarray]

    def propagate(self, states, dt):
        return np.asarray(states, dtype=float) @ self.transition(dt).T

    def process_noise(self, dt):
        return self.noise(dt)

    def jacobians(self, states, dt):
        states = np.asarray(states)
        return np.broadcast_to(self.transition(dt), (states.shape[0],) + self.transition(dt).shape).copy()


def constant_velocity(dim: int = 2, accel_std: float = 0.0) -> LinearDynamics:
    """Nearly-constant-velocity model on a [pos..., vel...] state."""

    def transition(dt):
        f = np.eye(2 * dim)
        f[:dim, dim:] = dt * np.eye(dim)
        return f

    def noise(dt):
        return white_acceleration_noise(dt, accel_std, dim)

    return LinearDynamics(transition, noise)


def white_acceleration_noise(dt: float, accel_std: float, dim: int = 2) -> np.ndarray:
    """Piecewise-constant acceleration noise for a [pos, vel] state."""
    q = accel_std**2
    eye = np.eye(dim)
    return q * np.block([[dt**4 / 4.0 * eye, dt**3 / 2.0 * eye], [dt**3 / 2.0 * eye, dt**2 * eye]])


@dataclass(frozen=True)
class MeasurementModel:
    """Linear observation z = H x + v, v ~ N(0, R)."""

    H: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if R.shape != (H.shape[0], H.shape[0]):
            raise ValueError("R must be square with one row per measured component")
        if not np.allclose(R, R.T) or np.linalg.eigvalsh(R)[0] <= 0.0:
            raise ValueError("R must be symmetric positive definite")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "R", R)

    def h(self, state: np.ndarray) -> np.ndarray:
        return self.H @ state

    @classmethod
    def position(cls, noise_std: float, state_dim: int = 4, dim: int = 2) -> "MeasurementModel":
        H = np.zeros((dim, state_dim))
        H[:, :dim] = np.eye(dim)
        return cls(H, noise_std**2 * np.eye(dim))


def predict_track(track: Track, dyn: DynamicsModel, dt: float) -> Track:
    return predict_tracks([track], dyn, dt)[0]


def predict_tracks(tracks, dyn: DynamicsModel, dt: float) -> list[Track]:
    """Batched EKF time update; one flow evaluation per perturbation."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    tracks = list(tracks)
    if not tracks:
        return []
    means = np.stack([t.mean for t in tracks])
    new_means = dyn.propagate(means, dt)
    if not np.all(np.isfinite(new_means)):
        raise PropagationError("propagation diverged")
    F = dyn.jacobians(means, dt)
    Q = dyn.process_noise(dt)
    out = []
    for t, mu, Fi in zip(tracks, new_means, F):
        P = Fi @ t.covariance @ Fi.T + Q
        if not np.all(np.isfinite(P)):
            raise PropagationError("propagation diverged")
        out.append(Track(t.label, mu, enforce_psd(P)))
    return out


def _innovation(track: Track, meas: MeasurementModel):
    H = meas.H
    S = H @ track.covariance @ H.T + meas.R
    S = 0.5 * (S + S.T)
    try:
        chol = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise SingularInnovationError("singular innovation covariance") from exc
    return meas.h(track.mean), S, chol


def _forward_substitute(chol: np.ndarray, resid: np.ndarray) -> np.ndarray:
    # elementwise so every column sees identical arithmetic whatever the batch size
    d = chol.shape[0]
    sol = np.empty_like(resid)
    for i in range(d):
        acc = resid[:, i].copy()
        for j in range(i):
            acc -= chol[i, j] * sol[:, j]
        sol[:, i] = acc / chol[i, i]
    return sol


def _logpdf_and_maha(resid: np.ndarray, chol: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """log N(resid; 0, L L') and squared Mahalanobis distance, resid shape (b, d)."""
    d = chol.shape[0]
    sol = _forward_substitute(chol, resid)
    maha = np.sum(sol * sol, axis=1)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (maha + logdet + d * LOG_2PI), maha


def update_track(track: Track, z, meas: MeasurementModel) -> tuple[Track, float]:
    z = np.asarray(z, dtype=float).reshape(-1)
    zhat, S, chol = _innovation(track, meas)
    resid = z - zhat
    loglik = float(_logpdf_and_maha(resid[None, :], chol)[0][0])
    P = track.covariance
    H = meas.H
    PHt = P @ H.T
    K = np.linalg.solve(S, PHt.T).T
    mean = track.mean + K @ resid
    ikh = np.eye(P.shape[0]) - K @ H
    cov = ikh @ P @ ikh.T + K @ meas.R @ K.T  # Joseph form
    return Track(track.label, mean, enforce_psd(cov)), loglik


def measurement_loglik(track: Track, z, meas: MeasurementModel) -> float:
    return float(measurement_logliks(track, z, meas)[0][0])


def measurement_logliks(track: Track, zs: np.ndarray, meas: MeasurementModel) -> tuple[np.ndarray, np.ndarray]:
    """Log-likelihoods and squared Mahalanobis distances for many measurements."""
    zs = np.asarray(zs, dtype=float).reshape(-1, meas.H.shape[0])
    zhat, _, chol = _innovation(track, meas)
    return _logpdf_and_maha(zs - zhat, chol)


def loglik_at_mean(track: Track, zs: np.ndarray, meas: MeasurementModel) -> np.ndarray:
    """log N(z; h(mean), R): the plug-in likelihood that ignores track uncertainty."""
    zs = np.asarray(zs, dtype=float).reshape(-1, meas.H.shape[0])
    chol = np.linalg.cholesky(meas.R)
    return _logpdf_and_maha(zs - meas.h(track.mean), chol)[0]
