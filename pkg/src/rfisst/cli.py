"""Command-line entry point.

    rfisst run --scenario fifteen.json --method rfisst --seed 7 --out out/
    rfisst --bench --out bench/
    rfisst --oracle-check

Exit status: 0 on success, 2 on a usage or config error, 3 when HOMHT breaks
on an infeasible enumeration (partial reports are still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
from pathlib import Path

import numba
import numpy as np

from . import __version__
from .bench import DEFAULT_SIZES, timing_benchmark
from .runner import RunConfig, run_tracker
from .scenario import ScenarioConfig, ScenarioError, bundled_scenario, generate_scenario

EXIT_OK, EXIT_CONFIG, EXIT_BREAK = 0, 2, 3

HEADERS = {
    "weights.csv": ["scan", "hypothesis_id", "weight"],
    "cardinality.csv": ["scan", "n", "probability", "mean", "mode"],
    "estimates.csv": ["scan", "object", "match_distance_km", "hit"],
    "timing.csv": ["M", "m", "A_M", "method", "nanoseconds", "steps", "break"],
}


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else str(x)


class ReportWriter:
    """Append-only CSV reports, flushed after every scan so a crashed run
    leaves parseable partial files."""

    def __init__(self, out: Path, names=tuple(HEADERS)):
        out.mkdir(parents=True, exist_ok=True)
        self._files = {}
        self._writers = {}
        for name in names:
            fh = open(out / name, "w", newline="")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HEADERS[name])
            self._files[name], self._writers[name] = fh, w

    def rows(self, name: str, rows) -> None:
        self._writers[name].writerows([[_fmt(v) for v in r] for r in rows])

    def flush(self) -> None:
        for fh in self._files.values():
            fh.flush()

    def close(self) -> None:
        for fh in self._files.values():
            fh.close()


def _manifest(out: Path, payload: dict) -> None:
    base = {
        "rfisst": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "numba": numba.__version__,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump({**base, **payload}, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def resolve_scenario(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    q = bundled_scenario(p.name)
    if q.exists():
        return q
    raise ScenarioError(f"scenario {name!r} not found (also looked for a bundled {p.name})")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rfisst", description="Randomized hypothesis-level FISST tracker.")
    ap.add_argument("command", nargs="?", choices=["run"], default="run", help="run a scenario (default)")
    ap.add_argument("--scenario", help="scenario JSON path or the name of a bundled scenario")
    ap.add_argument("--method", choices=["rfisst", "homht"], default="rfisst")
    ap.add_argument("--seed", type=int, default=None, help="master seed (default: the scenario's)")
    ap.add_argument("--mcmc-steps", type=int, default=100_000, help="total chain length per branch")
    ap.add_argument("--burn-in", type=int, default=10_000)
    ap.add_argument("--max-children", type=int, default=10, help="distinct children kept per branch (C)")
    ap.add_argument("--h-inf", type=int, default=None, help="hypotheses kept per scan")
    ap.add_argument("--gate", choices=["on", "off"], default=None,
                    help="Mahalanobis gating (default: on for homht, off for rfisst)")
    ap.add_argument("--scans", type=int, default=None, help="stop after this many scans")
    ap.add_argument("--out", default="out", help="report directory")
    ap.add_argument("--clock", choices=["wall", "none"], default="wall",
                    help="'none' leaves timing columns empty so reports are byte-reproducible")
    ap.add_argument("--bench", action="store_true", help="run the hypothesis-generation timing sweep")
    ap.add_argument("--oracle-check", action="store_true", help="compare the engine against the oracles")
    ap.add_argument("--instances", type=int, default=100, help="random instances for --oracle-check")
    return ap


def _run(args) -> int:
    cfg = ScenarioConfig.load(resolve_scenario(args.scenario))
    seed = cfg.seed if args.seed is None else args.seed
    rc = RunConfig(method=args.method, mcmc_steps=args.mcmc_steps, burn_in=args.burn_in,
                   max_children=args.max_children, H_inf=args.h_inf,
                   gate=None if args.gate is None else args.gate == "on", seed=seed)
    sc = generate_scenario(cfg, seed)
    out = Path(args.out)
    writer = ReportWriter(out)
    meta = {"mode": "run", "method": args.method, "seed": seed, "scenario": cfg.to_dict(),
            "mcmc_steps": args.mcmc_steps, "burn_in": args.burn_in, "max_children": args.max_children,
            "H_inf": args.h_inf or cfg.tracker.H_inf, "gate": rc.gate_on, "clock": args.clock,
            "scans": args.scans}
    _manifest(out, {**meta, "status": "running"})
    status, done = "ok", 0
    try:
        for res in run_tracker(sc, rc):
            k, rep, cls = res.scan, res.report, res.classification
            writer.rows("weights.csv", [(k, hid, float(w)) for hid, w in zip(rep.hypothesis_ids, rep.weights)])
            card = rep.cardinality
            writer.rows("cardinality.csv", [(k, n, p, card.mean, card.mode) for n, p in card.distribution.items()])
            est = [(k, obj, cls.distances[obj], "HIT" if cls.hits[obj] else
                    ("MISS" if obj in cls.matches else "UNTRACKED")) for obj in sorted(cls.hits)]
            est += [(k, f"extra:{lab}", None, "EXTRA") for lab in cls.extra]
            writer.rows("estimates.csv", est)
            M, A = rep.largest_branch
            ns = rep.generation_ns if args.clock == "wall" and not rep.broke else None
            writer.rows("timing.csv", [(M, len(sc.measurements[k - 1]), A, args.method, ns,
                                        rep.mcmc_steps, int(rep.broke))])
            writer.flush()
            done = k
            if rep.broke:
                status = "homht_break"
                print(f"HOMHT break at scan {k}: {'; '.join(rep.warnings)}", file=sys.stderr)
            if args.scans is not None and k >= args.scans:
                break
    finally:
        writer.close()
        _manifest(out, {**meta, "status": status, "scans_completed": done})
    return EXIT_BREAK if status == "homht_break" else EXIT_OK


def _bench(args) -> int:
    seed = 0 if args.seed is None else args.seed
    rows = timing_benchmark(DEFAULT_SIZES, seed=seed, steps=args.mcmc_steps, burn_in=args.burn_in,
                            clock=args.clock == "wall")
    out = Path(args.out)
    writer = ReportWriter(out, ("timing.csv",))
    writer.rows("timing.csv", [(r.M, r.m, r.A_M, r.method, r.nanoseconds, r.steps, int(r.broke)) for r in rows])
    writer.close()
    _manifest(out, {"mode": "bench", "seed": seed, "mcmc_steps": args.mcmc_steps, "burn_in": args.burn_in,
                    "sizes": [list(s) for s in DEFAULT_SIZES], "clock": args.clock, "status": "ok"})
    for r in rows:
        t = "BREAK" if r.broke else ("-" if r.nanoseconds is None else f"{r.nanoseconds / 1e6:10.2f} ms")
        print(f"{r.method:7s} M={r.M:3d} m={r.m:3d} A_M={r.A_M:.3e} {t}")
    return EXIT_OK


def _oracle_check(args) -> int:
    from .validation import oracle_report

    seed = 0 if args.seed is None else args.seed
    rep = oracle_report(seed, args.instances)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "oracle.json", "w") as fh:
        json.dump(rep, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for k, v in rep.items():
        print(f"{k}: {v}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.bench:
            return _bench(args)
        if args.oracle_check:
            return _oracle_check(args)
        if not args.scenario:
            print("rfisst: --scenario is required for a run", file=sys.stderr)
            return EXIT_CONFIG
        return _run(args)
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"rfisst: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
