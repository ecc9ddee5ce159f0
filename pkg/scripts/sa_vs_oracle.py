"""Annealing against the exact 1-center on random user sets.

    python scripts/sa_vs_oracle.py --runs 100 --users 20 --box 5
"""

import argparse
import statistics
import time

import numpy as np

from uavlight.placement import AnnealConfig, anneal, exact_one_center
from uavlight.scenario import UserRequest


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=100)
    ap.add_argument("--users", type=int, default=20)
    ap.add_argument("--box", type=float, default=5.0)
    ap.add_argument("--random-start", action="store_true")
    args = ap.parse_args()

    gaps, times = [], []
    for seed in range(args.runs):
        pts = np.random.default_rng(seed).uniform(0, args.box, size=(args.users, 2))
        users = [UserRequest(float(x), float(y), 2, 10.0) for x, y in pts]
        t0 = time.perf_counter()
        trace = anneal(users, AnnealConfig(rng_seed=seed, random_start=args.random_start))
        times.append(time.perf_counter() - t0)
        _, r = exact_one_center(users)
        gaps.append((trace.final_f - r) / r)

    within = sum(g <= 0.02 for g in gaps)
    print(f"runs {args.runs}, users {args.users}, box {args.box} m")
    print(f"within 2 %: {within}/{args.runs}")
    print(f"relative gap: median {statistics.median(gaps):.2e}, max {max(gaps):.2e}")
    print(f"time per run: mean {statistics.mean(times):.3f} s, max {max(times):.3f} s")


if __name__ == "__main__":
    main()
