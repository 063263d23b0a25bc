#!/usr/bin/env python3
"""Benchmark the compiled enumeration kernel against the pure-Python one.

The inner loop of enumerate_mpe evaluates every candidate response profile
(up to 256 x 256 under cycle-valuing policies) exactly; this is the hot
path of the oracle sweeps.  Run after installing the package:

    python benchmarks/bench_kernel.py [--triples 20] [--policy forbidden]
"""

import argparse
import statistics
import time

import numpy as np

from algoprice import two_price
from algoprice.demand import normalized_table
from algoprice.dynamics import CyclePolicy


def time_backend(backend, triples, policy):
    times = []
    survivors = 0
    for x, y, beta in triples:
        table = normalized_table(x, y)
        start = time.perf_counter()
        out = two_price.enumerate_mpe(table, beta, policy, backend=backend)
        times.append(time.perf_counter() - start)
        survivors += len(out)
    return times, survivors


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--triples", type=int, default=20)
    parser.add_argument("--policy", default="forbidden",
                        choices=[p.value for p in CyclePolicy])
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    policy = CyclePolicy(args.policy)
    rng = np.random.default_rng(args.seed)
    triples = []
    while len(triples) < args.triples:
        x = rng.uniform(0.05, 2.5)
        y = rng.uniform(max(0.0, x - 1.0) + 0.05, 3.0)
        beta = rng.uniform(0.05, 0.95)
        triples.append((x, y, beta))

    backends = ["pure-python"]
    if two_price.kernel_backend() == "compiled":
        backends.insert(0, "compiled")
    else:
        print("compiled kernel unavailable; timing the fallback only")

    results = {}
    for backend in backends:
        times, survivors = time_backend(backend, triples, policy)
        results[backend] = times
        print(f"{backend:>12}: total {sum(times):8.3f} s  "
              f"median/call {statistics.median(times)*1e3:8.2f} ms  "
              f"(survivors {survivors})")

    if len(results) == 2:
        speedup = sum(results["pure-python"]) / sum(results["compiled"])
        print(f"{'speedup':>12}: {speedup:.1f}x")

    out_c = {}
    for backend in backends:
        table = normalized_table(1.0, 0.5)
        out_c[backend] = {(p.fa, p.fb)
                          for p in two_price.enumerate_mpe(table, 0.6, policy,
                                                           backend=backend)}
    if len(out_c) == 2:
        assert out_c["compiled"] == out_c["pure-python"], "backends disagree"
        print("agreement check: identical survivor sets")


if __name__ == "__main__":
    main()
