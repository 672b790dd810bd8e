"""Compare the compiled and pure-numpy kernel backends.

Times the permutation-statistic kernel alone and a full permutation test for
a few series lengths, checks that both backends return identical numbers,
and prints one row per case.

    python benchmarks/bench_backends.py [--K 10000] [--repeat 5] [--json out.json]
"""
import argparse
import json
import statistics
import sys
import time

import numpy as np

from propeffect import InterventionSeries, TestConfig, _backend
from propeffect.findiff import gradient_stencil
from propeffect.stattest import permutation_test, seeded_permutations


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), statistics.median(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=int, default=10000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", default="11,101,1001")
    ap.add_argument("--json")
    args = ap.parse_args(argv)

    names = _backend.available()
    if len(names) < 2:
        print(f"only {names} available; build the extension to compare", file=sys.stderr)
    original = _backend.kernels
    rows = []
    for n in (int(v) for v in args.sizes.split(",")):
        y = np.random.default_rng(n).uniform(size=n)
        series = InterventionSeries.unit(y)
        idx, w = gradient_stencil(series.grid)
        perms = seeded_permutations(0, n, args.K)
        results = {}
        for name in names:
            k = _backend.get(name)
            _backend.kernels = k
            try:
                kmin, kmed, stats = best_of(lambda: k.perm_mean_abs_gradient(y, perms, idx, w), args.repeat)
                tmin, tmed, _ = best_of(lambda: permutation_test(series, TestConfig(K=args.K, seed=0)), args.repeat)
            finally:
                _backend.kernels = original
            results[name] = stats
            rows.append({"n": n, "K": args.K, "backend": name, "kernel_s": kmin, "kernel_median_s": kmed,
                         "test_s": tmin, "test_median_s": tmed})
        identical = all(np.array_equal(results[names[0]], r) for r in results.values())
        for row in rows[-len(names):]:
            row["identical"] = identical

    base = {(r["n"]): r["kernel_s"] for r in rows if r["backend"] == "python"}
    print(f"{'n':>6} {'K':>7} {'backend':>8} {'kernel ms':>10} {'test ms':>9} {'speedup':>8} identical")
    for r in rows:
        speed = base.get(r["n"], float("nan")) / r["kernel_s"]
        print(f"{r['n']:>6} {r['K']:>7} {r['backend']:>8} {1e3 * r['kernel_s']:>10.2f} "
              f"{1e3 * r['test_s']:>9.2f} {speed:>7.1f}x {r['identical']}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
