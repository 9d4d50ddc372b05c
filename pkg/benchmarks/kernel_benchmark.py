#!/usr/bin/env python3
"""Timing comparison of the compiled and pure kernel backends.

Run as: python3 benchmarks/kernel_benchmark.py
"""

import time

import numpy as np

from dfotr._kernels import _pure

try:
    from dfotr._kernels import _native
except ImportError:
    _native = None


def time_fn(fn, reps):
    start = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - start) / reps


def bench_quad_eval(backend, n, reps=2000):
    rng = np.random.default_rng(0)
    g = rng.standard_normal(n)
    H = rng.standard_normal((n, n))
    H = 0.5 * (H + H.T)
    d = rng.standard_normal(n)
    return time_fn(lambda: backend.quad_value_grad(1.0, g, H, d), reps)


def bench_steihaug(backend, n, reps=300):
    rng = np.random.default_rng(1)
    a = rng.standard_normal((n, n))
    H = a @ a.T + 0.1 * np.eye(n)
    g = rng.standard_normal(n)
    return time_fn(lambda: backend.steihaug(g, H, 1.0, 1e-8, 0), reps)


def main():
    backends = [("pure", _pure)]
    if _native is not None:
        backends.append(("native", _native))
    print(f"{'kernel':<22}{'n':>4}" + "".join(f"{name:>12}" for name, _ in backends)
          + ("{:>10}".format("speedup") if _native else ""))
    for label, bench in (("quad_value_grad", bench_quad_eval),
                         ("steihaug_tcg", bench_steihaug)):
        for n in (5, 20, 50):
            times = [bench(be, n) for _, be in backends]
            row = f"{label:<22}{n:>4}"
            for t in times:
                row += f"{t * 1e6:>10.1f}us"
            if len(times) == 2:
                row += f"{times[0] / times[1]:>9.1f}x"
            print(row)


if __name__ == "__main__":
    main()
