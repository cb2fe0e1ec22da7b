"""Hypothesis-generation timing sweep for both methods, with log-log slopes.

    python3 scripts/bench_sweep.py --steps 100000 --out bench.csv
"""

import argparse
import csv

from rfisst.bench import DEFAULT_SIZES, loglog_slope, timing_benchmark


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="optional CSV path")
    args = ap.parse_args()
    rows = timing_benchmark(DEFAULT_SIZES, seed=args.seed, steps=args.steps)
    for r in rows:
        t = "BREAK" if r.broke else f"{r.nanoseconds / 1e6:10.2f} ms"
        print(f"{r.method:7s} M={r.M:3d} m={r.m:3d} A_M={r.A_M:10.3e} {t}")
    rf = [r.nanoseconds for r in rows if r.method == "rfisst"]
    print(f"homht log-log slope (A_M >= 1e4): {loglog_slope(rows, 'homht', 10**4):.2f}")
    print(f"rfisst max/min time: {max(rf) / min(rf):.2f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["M", "m", "A_M", "method", "nanoseconds", "steps", "break"])
            w.writerows([r.M, r.m, r.A_M, r.method, r.nanoseconds, r.steps, int(r.broke)] for r in rows)


if __name__ == "__main__":
    main()
