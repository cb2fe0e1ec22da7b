"""Ground truth, measurement streams and tracker setup from a scenario config.

Configs are JSON documents that mirror ``ScenarioConfig`` field for field;
unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .core import Hypothesis, HypothesisForest, Track
from .engine import BirthDeathConfig, TrackerModels
from .gaussian import PropagationError
from .ssa import (
    MU_EARTH,
    R_EARTH,
    Sensor,
    TwoBodyDynamics,
    birth_partitions,
    propagate_two_body,
)

RANDOM_IN_FOV = "random_in_fov"

# named RNG substreams derived from the scenario seed
_STREAM_ORBITS, _STREAM_OBSERVE, _STREAM_INIT, _STREAM_BIRTHS = 1, 2, 3, 4


class ScenarioError(ValueError):
    pass


@dataclass
class SensorConfig:
    position_km: list = field(default_factory=lambda: [0.0, 0.0])
    look_direction_deg: float = 15.0
    fov_half_angle_deg: float = 15.0
    range_min_km: float = R_EARTH
    range_max_km: float = 40000.0
    noise_std_km: float = 1.0
    pD: float = 0.9
    clutter_rate: float = 1.0

    def build(self) -> Sensor:
        return Sensor(tuple(self.position_km), math.radians(self.look_direction_deg),
                      math.radians(self.fov_half_angle_deg), self.range_min_km, self.range_max_km,
                      self.noise_std_km, self.pD, self.clutter_rate)


@dataclass
class TrackerConfig:
    alpha: float = 0.0
    beta: float = 0.0
    birth_partitions: int = 1
    birth_velocity_std_kms: float = 5.0
    H_inf: int = 10
    hit_bound_km: float = 5.0
    accel_std_kms2: float = 1e-6
    max_substep_s: float = 10.0


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    object_count: int = 15
    initial_known: int | None = None
    birth_schedule: list = field(default_factory=list)
    death_schedule: list = field(default_factory=list)
    orbit_radius_km: list = field(default_factory=lambda: [7000.0, 26000.0])
    eccentricity_max: float = 0.0
    start_in_fov: bool = False
    scan_interval_s: float = 30.0
    total_scans: int = 100
    initial_position_std_km: float = 1.0
    initial_velocity_std_kms: float = 0.01
    seed: int = 0
    sensor: SensorConfig = field(default_factory=SensorConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)

    def __post_init__(self):
        if isinstance(self.sensor, dict):
            self.sensor = _from_dict(SensorConfig, self.sensor, "sensor")
        if isinstance(self.tracker, dict):
            self.tracker = _from_dict(TrackerConfig, self.tracker, "tracker")
        self.validate()

    @property
    def n_initial(self) -> int:
        return self.object_count - len(self.birth_schedule)

    @property
    def n_known(self) -> int:
        return self.n_initial if self.initial_known is None else self.initial_known

    def validate(self) -> None:
        if self.scan_interval_s <= 0:
            raise ScenarioError("scan_interval_s must be positive")
        if self.total_scans < 1:
            raise ScenarioError("total_scans must be >= 1")
        if self.n_initial < 0:
            raise ScenarioError("more scheduled births than objects")
        if not 0 <= self.n_known <= self.n_initial:
            raise ScenarioError("initial_known must lie between 0 and the initially alive object count")
        lo, hi = self.orbit_radius_km
        if not R_EARTH < lo <= hi:
            raise ScenarioError("orbit_radius_km must satisfy R_earth < low <= high")
        if not 0 <= self.eccentricity_max < 1:
            raise ScenarioError("eccentricity_max must lie in [0, 1)")
        if self.eccentricity_max > 0 and lo * (1 - self.eccentricity_max) <= R_EARTH:
            raise ScenarioError("eccentricity_max lets the lowest orbit hit the Earth")
        for b in self.birth_schedule:
            if set(b) - {"scan", "state"}:
                raise ScenarioError(f"unknown birth_schedule keys {sorted(set(b) - {'scan', 'state'})}")
            if not 1 <= int(b["scan"]) <= self.total_scans:
                raise ScenarioError(f"birth at scan {b['scan']} outside 1..{self.total_scans}")
            state = b.get("state", RANDOM_IN_FOV)
            if state != RANDOM_IN_FOV and (len(state) != 4 or not all(map(math.isfinite, state))):
                raise ScenarioError("birth state must be a finite 4-vector or 'random_in_fov'")
        for d in self.death_schedule:
            if set(d) != {"scan", "object"}:
                raise ScenarioError("death_schedule entries need exactly 'scan' and 'object'")
            if not 1 <= int(d["scan"]) <= self.total_scans or not 0 <= int(d["object"]) < self.object_count:
                raise ScenarioError(f"invalid death {d}")
        if not self.start_in_fov:
            longest = 2 * math.pi * math.sqrt((hi / (1 - self.eccentricity_max)) ** 3 / MU_EARTH)
            if self.total_scans * self.scan_interval_s < longest:
                raise ScenarioError(
                    f"simulation span {self.total_scans * self.scan_interval_s:.0f} s is shorter than the "
                    f"longest orbital period {longest:.0f} s; lengthen it or set start_in_fov")
        self.sensor.build()
        if self.tracker.H_inf < 1:
            raise ScenarioError("tracker.H_inf must be >= 1")
        if self.tracker.hit_bound_km <= 0:
            raise ScenarioError("tracker.hit_bound_km must be positive")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        return _from_dict(cls, d, "scenario")

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _from_dict(cls, d: dict, where: str):
    if not isinstance(d, dict):
        raise ScenarioError(f"{where} must be a JSON object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - names)
    if unknown:
        raise ScenarioError(f"unknown {where} keys: {unknown}")
    try:
        return cls(**d)
    except TypeError as exc:
        raise ScenarioError(str(exc)) from exc


def bundled_scenario(name: str) -> Path:
    """Path of a scenario shipped with the package (``fifteen.json`` ...)."""
    return Path(__file__).parent / "scenarios" / name


@dataclass
class TruthLog:
    """``states[k]`` maps object id to its true state at scan k (0 = start)."""

    states: list[dict[int, np.ndarray]]
    alive: dict[int, tuple[int, int]]  # id -> (first scan, last scan) inclusive

    def __post_init__(self):
        for first, last in self.alive.values():
            if first > last:
                raise ScenarioError("alive interval ends before it starts")
        for snap in self.states:
            for s in snap.values():
                if not np.all(np.isfinite(s)):
                    raise ScenarioError("non-finite truth state")


@dataclass
class Scenario:
    config: ScenarioConfig
    truth: TruthLog
    measurements: list  # index k-1 holds scan k's (m, 2) array
    origins: list
    initial_forest: HypothesisForest
    sensor: Sensor


def _orbit_state(rng, a_range, ecc_max, bearing=None) -> np.ndarray:
    a = rng.uniform(*a_range)
    e = rng.uniform(0.0, ecc_max) if ecc_max > 0 else 0.0
    nu = rng.uniform(-math.pi, math.pi)
    argp = rng.uniform(-math.pi, math.pi)
    if bearing is not None:
        argp = bearing - nu
    p = a * (1 - e * e)
    r = p / (1 + e * math.cos(nu))
    vr = math.sqrt(MU_EARTH / p)
    pos = r * np.array([math.cos(nu), math.sin(nu)])
    vel = vr * np.array([-math.sin(nu), e + math.cos(nu)])
    c, s = math.cos(argp), math.sin(argp)
    rot = np.array([[c, -s], [s, c]])
    return np.concatenate([rot @ pos, rot @ vel])


def _fov_bearing(rng, sensor: Sensor, a: float, span_s: float, entry: bool) -> float:
    lo = sensor.look_direction - sensor.fov_half_angle
    hi = sensor.look_direction + sensor.fov_half_angle
    margin = 0.05 * (hi - lo)
    sweep = math.sqrt(MU_EARTH / a**3) * span_s
    top = hi - margin - sweep
    if entry:
        return lo + margin + rng.uniform(0.0, 0.1) * (hi - lo)
    if top <= lo + margin:
        return lo + margin
    return rng.uniform(lo + margin, top)


def _in_fov_orbit(rng, cfg: ScenarioConfig, sensor: Sensor, span_s: float, entry: bool) -> np.ndarray:
    a = rng.uniform(*cfg.orbit_radius_km)
    bearing = _fov_bearing(rng, sensor, a, span_s, entry)
    v = math.sqrt(MU_EARTH / a)
    pos = a * np.array([math.cos(bearing), math.sin(bearing)])
    vel = v * np.array([-math.sin(bearing), math.cos(bearing)])
    return np.concatenate([pos, vel])


def _stream(seed: int, name: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(name,)))


def generate_scenario(cfg: ScenarioConfig, seed: int | None = None) -> Scenario:
    """Simulate truth and measurements and build the initial one-hypothesis forest."""
    from .ssa import observe

    cfg.validate()
    seed = cfg.seed if seed is None else seed
    sensor = cfg.sensor.build()
    dt, n_scans = cfg.scan_interval_s, cfg.total_scans
    r_orbit, r_birth, r_obs, r_init = (_stream(seed, s) for s in
                                       (_STREAM_ORBITS, _STREAM_BIRTHS, _STREAM_OBSERVE, _STREAM_INIT))

    state: dict[int, np.ndarray] = {}
    for i in range(cfg.n_initial):
        if cfg.start_in_fov:
            state[i] = _in_fov_orbit(r_orbit, cfg, sensor, n_scans * dt, entry=False)
        else:
            state[i] = _orbit_state(r_orbit, cfg.orbit_radius_km, cfg.eccentricity_max)
    births = sorted(((int(b["scan"]), b.get("state", RANDOM_IN_FOV)) for b in cfg.birth_schedule),
                    key=lambda x: x[0])
    deaths = {int(d["scan"]): [] for d in cfg.death_schedule}
    for d in cfg.death_schedule:
        deaths[int(d["scan"])].append(int(d["object"]))

    alive = {i: [0, n_scans] for i in state}
    states = [{i: s.copy() for i, s in state.items()}]
    measurements, origins = [], []
    next_id = cfg.n_initial
    for k in range(1, n_scans + 1):
        if state:
            ids = sorted(state)
            try:
                new = propagate_two_body(np.stack([state[i] for i in ids]), dt, max_substep=cfg.tracker.max_substep_s)
            except PropagationError as exc:
                raise ScenarioError(f"truth orbit hit the Earth at scan {k}") from exc
            state = dict(zip(ids, new))
        for obj in deaths.get(k, []):
            if obj in state:
                del state[obj]
                alive[obj][1] = k - 1
        for when, birth_state in births:
            if when == k:
                if birth_state == RANDOM_IN_FOV:
                    s0 = _in_fov_orbit(r_birth, cfg, sensor, (n_scans - k) * dt, entry=True)
                else:
                    s0 = np.asarray(birth_state, dtype=float)
                state[next_id] = s0
                alive[next_id] = [k, n_scans]
                next_id += 1
        ids = sorted(state)
        truth = np.stack([state[i] for i in ids]) if ids else np.zeros((0, 4))
        z, o = observe(truth, sensor, r_obs, object_ids=ids)
        measurements.append(z)
        origins.append(o)
        states.append({i: s.copy() for i, s in state.items()})

    p_std, v_std = cfg.initial_position_std_km, cfg.initial_velocity_std_kms
    cov = np.diag([p_std**2, p_std**2, v_std**2, v_std**2])
    tracks = []
    for i in range(cfg.n_known):
        noise = r_init.normal(0.0, [p_std, p_std, v_std, v_std])
        tracks.append(Track(f"T{i}", states[0][i] + noise, cov))
    forest = HypothesisForest((Hypothesis("0:0", tuple(tracks)),), 0)
    truth_log = TruthLog(states, {i: tuple(v) for i, v in alive.items()})
    return Scenario(cfg, truth_log, measurements, origins, forest, sensor)


def tracker_models(cfg: ScenarioConfig, sensor: Sensor | None = None, gate: float | None = None,
                   at_mean: bool = False) -> TrackerModels:
    """Two-body EKF models matched to the scenario's sensor.

    The clutter density is the constant 1/A so a measurement pushed just past
    the FOV edge by noise never gets an impossible clutter explanation.
    """
    sensor = sensor or cfg.sensor.build()
    dyn = TwoBodyDynamics(accel_std=cfg.tracker.accel_std_kms2, max_substep=cfg.tracker.max_substep_s)
    return TrackerModels(dyn, sensor.measurement_model, cfg.scan_interval_s, sensor.pD,
                         -math.log(sensor.area), sensor.observable, gate, at_mean)


def birth_death_config(cfg: ScenarioConfig, sensor: Sensor | None = None) -> BirthDeathConfig:
    sensor = sensor or cfg.sensor.build()
    t = cfg.tracker
    parts = birth_partitions(sensor, t.birth_partitions, velocity_std=t.birth_velocity_std_kms) if t.alpha > 0 else []
    return BirthDeathConfig(t.alpha, t.beta, parts)


@dataclass(frozen=True)
class Classification:
    """Per-object outcome: distance to the matched estimate (inf if none) and HIT flag.

    ``extra`` lists estimate labels matched to no object.
    """

    distances: dict[int, float]
    hits: dict[int, bool]
    matches: dict[int, str]
    extra: tuple[str, ...]

    @property
    def misses(self) -> int:
        return sum(1 for i, h in self.hits.items() if not h and i in self.matches)

    @property
    def untracked(self) -> int:
        return sum(1 for i in self.hits if i not in self.matches)

    @property
    def red_stars(self) -> int:
        """Estimates that do not sit within the bound of a true object."""
        return self.misses + len(self.extra)


def classify_estimates(top: Hypothesis, truth: dict[int, Any], bound: float) -> Classification:
    """Greedy nearest-neighbour matching of estimated to true positions.

    Repeatedly pairs the globally closest (object, estimate); ties go to the
    lower object id then label. Objects left over are untracked, estimates
    left over are extra.
    """
    if bound <= 0:
        raise ValueError("bound must be positive")
    ids = sorted(truth)
    tracks = sorted(top.tracks, key=lambda t: t.label)
    pairs = []
    for i in ids:
        p = np.asarray(truth[i], dtype=float)[:2]
        for t in tracks:
            pairs.append((float(np.hypot(*(t.position - p))), i, t.label))
    pairs.sort()
    used_obj, used_trk = set(), set()
    distances = {i: math.inf for i in ids}
    matches = {}
    for d, i, lab in pairs:
        if i in used_obj or lab in used_trk:
            continue
        used_obj.add(i)
        used_trk.add(lab)
        distances[i] = d
        matches[i] = lab
    hits = {i: distances[i] <= bound for i in ids}
    extra = tuple(t.label for t in tracks if t.label not in used_trk)
    return Classification(distances, hits, matches, extra)
