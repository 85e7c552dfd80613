"""Benchmark of the compiled kernel lane against the pure-Python lane.

Times the two hot paths of the package: vectorized Student-t critical
values (the per-study selection test) and the Copas conditional-likelihood
fit over a full sensitivity grid.  Run via ``metabias bench``.
"""

from __future__ import annotations

import time

import numpy as np

from ._core import pykernels

try:
    from ._core import _ckernels as ckernels
except ImportError:
    ckernels = None


def _time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _bench_tq(kern, dfs):
    def run():
        kern.t_quantile_many(0.975, dfs)
    return run


def _bench_copas(kern, y, se, grid):
    start = [float(np.mean(y)), 0.01, 0.0]
    lower = [-10.0, 0.0, -0.9999]
    upper = [10.0, 10.0 * float(np.var(y, ddof=1)), 0.9999]

    def run():
        for a1, a2 in grid:
            kern.copas_fit_point(y, se, a1, a2, start, lower, upper)
    return run


def run_bench(repeats: int = 3) -> None:
    rng = np.random.default_rng(7)
    dfs = rng.uniform(3.0, 120.0, 100_000)
    m = 25
    se = rng.uniform(0.1, 0.4, m)
    y = 0.4 + rng.standard_normal(m) * se
    grid = [(a1, a2) for a1 in (-1.0, 0.0, 1.0, 2.0)
            for a2 in (0.0, 0.05, 0.1, 0.2)]

    cases = [
        ("t_quantile_many (100k dfs)", lambda kern: _bench_tq(kern, dfs)),
        (f"copas grid fit ({len(grid)} points, m={m})",
         lambda kern: _bench_copas(kern, y, se, grid)),
    ]
    print(f"{'benchmark':<38}{'pure-python':>14}{'compiled':>14}{'speedup':>10}")
    for label, make in cases:
        t_py = _time(make(pykernels), repeats)
        if ckernels is not None:
            t_c = _time(make(ckernels), repeats)
            print(f"{label:<38}{t_py:>12.4f} s{t_c:>12.4f} s"
                  f"{t_py / t_c:>9.1f}x")
        else:
            print(f"{label:<38}{t_py:>12.4f} s{'n/a':>14}{'':>10}")
    if ckernels is None:
        print("compiled lane not available; rebuild with the extension "
              "to compare")


if __name__ == "__main__":
    run_bench()
