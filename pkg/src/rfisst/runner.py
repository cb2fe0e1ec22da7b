"""Drive a tracker over a generated scenario, one scan at a time."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .association import GATE_DEFAULT, SamplerConfig
from .core import HypothesisForest
from .engine import EXHAUSTIVE, ScanReport, Weighting, scan
from .homht import homht_scan
from .scenario import Classification, Scenario, birth_death_config, classify_estimates, tracker_models


@dataclass(frozen=True)
class RunConfig:
    method: str = "rfisst"  # rfisst | homht
    mcmc_steps: int = 100_000
    burn_in: int = 10_000
    max_children: int = 10
    H_inf: int | None = None  # None: the scenario's tracker.H_inf
    gate: bool | None = None  # None: on for homht, off for rfisst
    exhaustive: bool = False
    at_mean: bool = False
    seed: int = 0
    threads: int | None = None

    def __post_init__(self):
        if self.method not in ("rfisst", "homht"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.mcmc_steps <= self.burn_in:
            raise ValueError("mcmc_steps must exceed burn_in")

    @property
    def gate_on(self) -> bool:
        return self.method == "homht" if self.gate is None else self.gate

    @property
    def sampler(self):
        if self.exhaustive:
            return EXHAUSTIVE
        return SamplerConfig(self.burn_in, self.mcmc_steps - self.burn_in, self.max_children, self.seed)


@dataclass
class ScanResult:
    scan: int
    forest: HypothesisForest
    report: ScanReport
    classification: Classification


def run_tracker(sc: Scenario, rc: RunConfig) -> Iterator[ScanResult]:
    """Yield one ScanResult per scan. Stops after a HOMHT break (that result has
    ``report.broke`` set and carries the unchanged forest)."""
    cfg = sc.config
    models = tracker_models(cfg, sc.sensor, GATE_DEFAULT if rc.gate_on else None, rc.at_mean)
    bd = birth_death_config(cfg, sc.sensor)
    H_inf = rc.H_inf or cfg.tracker.H_inf
    forest = sc.initial_forest
    for k, zs in enumerate(sc.measurements, start=1):
        if rc.method == "homht":
            forest, report = homht_scan(forest, zs, models, H_inf, bd, seed=rc.seed, threads=rc.threads)
        else:
            forest, report = scan(forest, zs, models, bd, rc.sampler, H_inf,
                                  weighting=Weighting.HFISST, seed=rc.seed, threads=rc.threads)
        cls = classify_estimates(forest.top(), sc.truth.states[k], cfg.tracker.hit_bound_km)
        yield ScanResult(k, forest, report, cls)
        if report.broke:
            return
