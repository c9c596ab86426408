"""Time the hot kernels under the numba path and the pure-numpy fallback.

Run twice:

    python benchmarks/bench_kernels.py            # numba (default)
    SORTCYCLES_NUMBA=0 python benchmarks/bench_kernels.py

The numbers are wall-clock for one full policy solve, one 10^4-period capital
path, and one 10^6-firm panel (the panel is numpy-vectorized either way and
serves as the baseline that does not depend on the flag).
"""

import time

import numpy as np

import sortcycles as sc
from sortcycles import kernels


def bench(label, fn, repeats=3):
    best = min(timeit(fn) for _ in range(repeats))
    print(f"{label:34s} {best * 1e3:10.2f} ms")
    return best


def timeit(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def main():
    print(f"numba path: {kernels.USE_NUMBA}")
    params, chain = sc.published_calibration()

    kernels.warmup()  # pay JIT compilation outside the timings

    policy = {}

    def solve():
        policy["p"] = sc.solve_policy(params, chain)

    bench("policy solve (time iteration)", solve)
    pol = policy["p"]

    states = sc.dynamics.draw_state_path(chain, 10_000, seed=1)
    k0 = float(np.sqrt(pol.K_grid[0] * pol.K_grid[-1]))
    bench("capital path, T=10^4",
          lambda: kernels.kpath(k0, states, pol.K_grid, pol.K_next))

    shock = sc.AggregateShockState.from_params(params, z=0.0)
    eq = sc.solve_static(params, shock, 30.0)
    bench("firm panel, n=10^6 (numpy either way)",
          lambda: sc.sample_cross_section(eq, params, shock, 1_000_000, seed=3))


if __name__ == "__main__":
    main()
