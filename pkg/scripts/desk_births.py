"""Eight-object birth scenario over several seeds: cardinality hand-off and red stars.

    python3 scripts/desk_births.py --seeds 10 --steps 5000
"""

import argparse
import time

from rfisst.runner import RunConfig, run_tracker
from rfisst.scenario import ScenarioConfig, bundled_scenario, generate_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default=str(bundled_scenario("desk_births.json")))
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--steps", type=int, default=5000)
    args = ap.parse_args()
    cfg = ScenarioConfig.load(args.scenario)
    for seed in range(args.seeds):
        t0 = time.perf_counter()
        sc = generate_scenario(cfg, seed)
        res = list(run_tracker(sc, RunConfig(mcmc_steps=args.steps, burn_in=args.steps // 10, seed=seed)))
        modes = "".join(str(r.report.cardinality.mode) for r in res)
        red = sum(r.classification.red_stars > 0 for r in res)
        print(f"seed {seed}: modes {modes}  red-star scans {red}/{len(res)}  {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
