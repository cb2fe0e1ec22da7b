"""Planar space-surveillance models: two-body dynamics, a fixed angular-FOV
position sensor with uniform clutter, and Gaussian birth pdfs over FOV wedges.

Units are km, s and radians throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Track
from .gaussian import DynamicsModel, MeasurementModel, PropagationError, white_acceleration_noise

MU_EARTH = 398600.4418  # km^3/s^2
R_EARTH = 6378.0  # km


def _two_body_rhs(states: np.ndarray, mu: float) -> np.ndarray:
    r = states[:, :2]
    rnorm = np.sqrt(np.sum(r * r, axis=1))
    acc = -mu * r / rnorm[:, None] ** 3
    return np.concatenate([states[:, 2:], acc], axis=1)


def propagate_two_body(state, dt: float, mu: float = MU_EARTH, max_substep: float = 10.0) -> np.ndarray:
    """Fixed-step RK4 integration of planar Keplerian motion.

    Accepts one state of shape (4,) or a batch (b, 4). Raises
    ``PropagationError`` if any trajectory dips below the Earth's surface.
    """
    x = np.array(state, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if dt == 0:
        return x[0] if single else x
    n_sub = max(1, int(math.ceil(abs(dt) / max_substep - 1e-12)))
    h = dt / n_sub
    for _ in range(n_sub):
        k1 = _two_body_rhs(x, mu)
        k2 = _two_body_rhs(x + 0.5 * h * k1, mu)
        k3 = _two_body_rhs(x + 0.5 * h * k2, mu)
        k4 = _two_body_rhs(x + h * k3, mu)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        r = np.sqrt(np.sum(x[:, :2] ** 2, axis=1))
        if np.any(r < R_EARTH) or not np.all(np.isfinite(x)):
            raise PropagationError("trajectory reached the Earth's surface")
    return x[0] if single else x


def specific_energy(state) -> float:
    s = np.asarray(state, dtype=float)
    return 0.5 * float(s[2:] @ s[2:]) - MU_EARTH / float(np.hypot(s[0], s[1]))


def angular_momentum(state) -> float:
    s = np.asarray(state, dtype=float)
    return float(s[0] * s[3] - s[1] * s[2])


def orbital_period(semi_major_axis: float, mu: float = MU_EARTH) -> float:
    return 2.0 * math.pi * math.sqrt(semi_major_axis**3 / mu)


@dataclass(frozen=True)
class TwoBodyDynamics(DynamicsModel):
    mu: float = MU_EARTH
    accel_std: float = 1e-6
    max_substep: float = 10.0

    def propagate(self, states, dt):
        return propagate_two_body(states, dt, self.mu, self.max_substep)

    def process_noise(self, dt):
        return white_acceleration_noise(dt, self.accel_std)


def wrap_angle(a):
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


@dataclass(frozen=True)
class Sensor:
    """Fixed-look position sensor. The observable region is the FOV wedge cut
    to the annulus ``range_min <= r <= range_max`` around the sensor."""

    position: tuple[float, float] = (0.0, 0.0)
    look_direction: float = math.radians(15.0)
    fov_half_angle: float = math.radians(15.0)
    range_min: float = R_EARTH
    range_max: float = 40000.0
    noise_std: float = 1.0
    pD: float = 0.9
    clutter_rate: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.fov_half_angle < math.pi:
            raise ValueError("fov_half_angle must lie in (0, pi)")
        if not 0.0 <= self.pD <= 1.0:
            raise ValueError("pD must lie in [0, 1]")
        if self.clutter_rate < 0:
            raise ValueError("clutter_rate must be non-negative")
        if not 0.0 <= self.range_min < self.range_max:
            raise ValueError("need 0 <= range_min < range_max")

    @property
    def R(self) -> np.ndarray:
        return self.noise_std**2 * np.eye(2)

    @property
    def measurement_model(self) -> MeasurementModel:
        return MeasurementModel.position(self.noise_std)

    @property
    def area(self) -> float:
        return self.fov_half_angle * (self.range_max**2 - self.range_min**2)

    def bearing_and_range(self, points):
        d = np.atleast_2d(np.asarray(points, dtype=float))[:, :2] - np.asarray(self.position)
        return np.arctan2(d[:, 1], d[:, 0]), np.hypot(d[:, 0], d[:, 1])

    def observable(self, points) -> np.ndarray:
        """Boolean mask: inside the FOV wedge and the range annulus."""
        bearing, rng = self.bearing_and_range(points)
        off = np.abs(wrap_angle(bearing - self.look_direction))
        return (off <= self.fov_half_angle + 1e-12) & (rng >= self.range_min) & (rng <= self.range_max)


def in_fov(position, s: Sensor) -> bool:
    bearing, _ = s.bearing_and_range(position)
    return bool(abs(float(wrap_angle(bearing[0] - s.look_direction))) <= s.fov_half_angle + 1e-12)


def clutter_logdensity(z, s: Sensor) -> np.ndarray | float:
    """log g(z): uniform over the observable wedge-annulus, -inf outside."""
    z = np.asarray(z, dtype=float)
    inside = s.observable(z)
    out = np.where(inside, -math.log(s.area), -np.inf)
    return float(out[0]) if z.ndim == 1 else out


def sample_in_region(rng: np.random.Generator, n: int, s: Sensor, angle_bounds=None, range_bounds=None) -> np.ndarray:
    """Uniform samples over a wedge-annulus (area element r dr dphi)."""
    lo, hi = angle_bounds if angle_bounds is not None else (
        s.look_direction - s.fov_half_angle, s.look_direction + s.fov_half_angle)
    r1, r2 = range_bounds if range_bounds is not None else (s.range_min, s.range_max)
    phi = rng.uniform(lo, hi, n)
    r = np.sqrt(rng.uniform(r1 * r1, r2 * r2, n))
    return np.asarray(s.position) + np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def observe(truth_states, s: Sensor, rng: np.random.Generator, object_ids=None):
    """Simulate one sensor report.

    Returns ``(measurements, origins)`` where ``origins[i]`` is the object id
    that produced measurement ``i`` or -1 for clutter. Order is shuffled.
    """
    truth = np.asarray(truth_states, dtype=float).reshape(-1, 4)
    ids = np.arange(len(truth)) if object_ids is None else np.asarray(object_ids)
    meas, origin = [], []
    if len(truth):
        visible = s.observable(truth[:, :2])
        detected = visible & (rng.random(len(truth)) < s.pD)
        for i in np.flatnonzero(detected):
            meas.append(truth[i, :2] + rng.normal(0.0, s.noise_std, 2))
            origin.append(int(ids[i]))
    n_clutter = int(rng.poisson(s.clutter_rate)) if s.clutter_rate > 0 else 0
    if n_clutter:
        meas.extend(sample_in_region(rng, n_clutter, s))
        origin.extend([-1] * n_clutter)
    if not meas:
        return np.zeros((0, 2)), np.zeros(0, dtype=int)
    meas = np.asarray(meas)
    origin = np.asarray(origin, dtype=int)
    order = rng.permutation(len(meas))
    return meas[order], origin[order]


@dataclass(frozen=True)
class BirthPartition:
    index: int
    angle_bounds: tuple[float, float]
    range_bounds: tuple[float, float]
    mean: np.ndarray = field(repr=False)
    covariance: np.ndarray = field(repr=False)

    def track(self, label: str) -> Track:
        return Track(label, self.mean, self.covariance)

    @property
    def area(self) -> float:
        (a, b), (r1, r2) = self.angle_bounds, self.range_bounds
        return 0.5 * (b - a) * (r2 * r2 - r1 * r1)


def wedge_moments(angle_bounds, range_bounds, origin=(0.0, 0.0)):
    """Mean and covariance of the uniform distribution on a wedge-annulus."""
    a, b = angle_bounds
    r1, r2 = range_bounds
    area = 0.5 * (b - a) * (r2**2 - r1**2)
    m3 = (r2**3 - r1**3) / 3.0
    m4 = (r2**4 - r1**4) / 4.0
    ex = m3 * (math.sin(b) - math.sin(a)) / area
    ey = m3 * (math.cos(a) - math.cos(b)) / area
    s2 = (math.sin(2 * b) - math.sin(2 * a)) / 4.0
    exx = m4 * (0.5 * (b - a) + s2) / area
    eyy = m4 * (0.5 * (b - a) - s2) / area
    exy = m4 * 0.5 * (math.sin(b) ** 2 - math.sin(a) ** 2) / area
    mean = np.array([ex, ey]) + np.asarray(origin, dtype=float)
    cov = np.array([[exx - ex * ex, exy - ex * ey], [exy - ex * ey, eyy - ey * ey]])
    return mean, cov


def birth_partitions(s: Sensor, count: int, range_bounds=None, velocity_std: float = 5.0) -> list[BirthPartition]:
    """Split the FOV into ``count`` equal wedges with moment-matched birth pdfs."""
    if count < 1:
        raise ValueError("need at least one birth partition")
    r1, r2 = range_bounds if range_bounds is not None else (s.range_min, s.range_max)
    lo = s.look_direction - s.fov_half_angle
    width = 2.0 * s.fov_half_angle / count
    parts = []
    for l in range(count):
        bounds = (lo + l * width, lo + (l + 1) * width)
        pos_mean, pos_cov = wedge_moments(bounds, (r1, r2), s.position)
        mean = np.concatenate([pos_mean, np.zeros(2)])
        cov = np.zeros((4, 4))
        cov[:2, :2] = pos_cov
        cov[2:, 2:] = velocity_std**2 * np.eye(2)
        parts.append(BirthPartition(l, bounds, (r1, r2), mean, cov))
    return parts
