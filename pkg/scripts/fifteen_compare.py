"""Run the fifteen-object scenario under RFISST and HOMHT and compare top hypotheses.

    python3 scripts/fifteen_compare.py --seed 7
"""

import argparse
import time

import numpy as np

from rfisst.runner import RunConfig, run_tracker
from rfisst.scenario import ScenarioConfig, bundled_scenario, generate_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--steps", type=int, default=100_000)
    args = ap.parse_args()
    cfg = ScenarioConfig.load(bundled_scenario("fifteen.json"))
    sc = generate_scenario(cfg, args.seed)
    runs = {}
    for method in ("rfisst", "homht"):
        t0 = time.perf_counter()
        runs[method] = list(run_tracker(sc, RunConfig(method, args.steps, args.steps // 10, seed=args.seed)))
        hits = all(all(r.classification.hits.values()) for r in runs[method])
        print(f"{method}: {time.perf_counter() - t0:.1f} s, all HIT: {hits}")
    worst = 0.0
    for a, b in zip(runs["rfisst"], runs["homht"]):
        ta, tb = a.forest.top(), b.forest.top()
        assert ta.labels == tb.labels, f"scan {a.scan}: different top hypotheses"
        worst = max([worst] + [float(np.max(np.abs(x.mean - y.mean))) for x, y in zip(ta.tracks, tb.tracks)])
    print(f"max top-hypothesis mean difference: {worst:.3e} km")


if __name__ == "__main__":
    main()
