"""Compare the compiled and pure-Python growth kernels.

    python benchmarks/bench_core.py --budget 300000 --repeat 3
"""
import argparse
import time

import numpy as np

from fppshape.distributions import DistributionSpec
from fppshape.simulator import KERNELS, run_fpp


def best_time(backend, spec, budget, repeat, seed):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = run_fpp(spec, budget, seed=seed, backend=backend)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--spec", default="gamma:3,1")
    ap.add_argument("--budget", type=int, default=300_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    spec = DistributionSpec.parse(args.spec)

    results = {}
    for name in sorted(KERNELS):
        results[name] = best_time(name, spec, args.budget, args.repeat, args.seed)
        t, cloud = results[name]
        print(f"{name:>9}: {t:8.3f} s  ({len(cloud)} sites, {args.budget / t:,.0f} events/s)")

    if len(results) == 2:
        (tc, a), (tp, b) = results["compiled"], results["python"]
        same = np.array_equal(a.sites, b.sites) and np.array_equal(a.times, b.times)
        print(f"speedup: {tp / tc:.1f}x, identical output: {same}")
    else:
        print("compiled kernel not built; only the Python kernel was timed")


if __name__ == "__main__":
    main()
