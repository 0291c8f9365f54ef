#!/usr/bin/env python3
"""Benchmark: compiled kernels vs the pure-Python fallback.

Run:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from softgames import kernels
from softgames.envs import GridWorld
from softgames.kernels import pure


def bench_lse(impl, n_calls=20_000):
    rng = np.random.default_rng(0)
    vals = rng.uniform(-5, 5, size=(64, 9))
    w = np.full(9, 1.0 / 9)
    t0 = time.perf_counter()
    acc = 0.0
    for i in range(n_calls):
        acc += impl.lse_beta(vals[i % 64], w, 7.5)
    dt = time.perf_counter() - t0
    return n_calls / dt, acc


def bench_loop(impl, estimate, n_episodes):
    gw = GridWorld()
    model = gw.as_game_model()
    q = np.zeros((model.n_states, 5, 5))
    t0 = time.perf_counter()
    res = impl.run_tabular_loop(
        q, model.next_states, model.next_probs, model.rewards,
        gw.terminal_mask(), gw.start_index,
        0.9, 0.5, 10.0, -5.0, 5.0, np.full(5, 0.2), np.full(5, 0.2),
        n_episodes, 200, 42, learn=True, estimate=estimate,
        alpha2=1.0, window=512, alpha2_decay=False,
    )
    dt = time.perf_counter() - t0
    return res["n_steps"] / dt, res["n_steps"]


def main():
    if not kernels.HAVE_COMPILED:
        print("compiled backend unavailable; benchmarking pure only")
    rows = []

    rate_pure, _ = bench_lse(pure, 5_000)
    rows.append(("lse_beta (calls/s)", rate_pure,
                 bench_lse(kernels, 50_000)[0] if kernels.HAVE_COMPILED else None))

    rate_pure, _ = bench_loop(pure, False, 20)
    rate_comp = bench_loop(kernels, False, 2_000)[0] if kernels.HAVE_COMPILED else None
    rows.append(("train loop (steps/s)", rate_pure, rate_comp))

    rate_pure, _ = bench_loop(pure, True, 5)
    rate_comp = bench_loop(kernels, True, 500)[0] if kernels.HAVE_COMPILED else None
    rows.append(("train+estimate loop (steps/s)", rate_pure, rate_comp))

    print(f"backend in use: {kernels.BACKEND}")
    print(f"{'kernel':<32}{'pure':>14}{'compiled':>14}{'speedup':>10}")
    for name, pure_rate, comp_rate in rows:
        if comp_rate is None:
            print(f"{name:<32}{pure_rate:>14,.0f}{'-':>14}{'-':>10}")
        else:
            print(f"{name:<32}{pure_rate:>14,.0f}{comp_rate:>14,.0f}"
                  f"{comp_rate / pure_rate:>9.1f}x")


if __name__ == "__main__":
    main()
