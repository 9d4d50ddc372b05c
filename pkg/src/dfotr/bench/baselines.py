"""Forward-difference quasi-Newton baselines (BFGS and Polak-Ribiere CG).

Gradients come from forward differences with the half-precision default
step; every difference evaluation is charged against the budget. The line
search enforces the weak Wolfe conditions, checking curvature only at points
that already satisfy sufficient decrease.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["fd_baseline", "DEFAULT_FD_STEP"]

DEFAULT_FD_STEP = float(np.sqrt(np.finfo(float).eps))


class _Budget(Exception):
    pass


class _Counted:
    def __init__(self, fun, max_evals):
        self.fun = fun
        self.max_evals = max_evals
        self.neval = 0

    def __call__(self, x):
        if self.neval >= self.max_evals:
            raise _Budget
        self.neval += 1
        return float(self.fun(x))


def _fd_grad(f, x, f0, h):
    n = x.size
    g = np.empty(n)
    for i in range(n):
        xp = x.copy()
        xp[i] += h
        g[i] = (f(xp) - f0) / h
    return g


def _wolfe(f, x, p, f0, g0p, grad, h, c1, c2, max_trials=30):
    lo = 0.0
    hi = math.inf
    t = 1.0
    for _ in range(max_trials):
        ft = f(x + t * p)
        armijo = math.isfinite(ft) and ft <= f0 + c1 * t * g0p
        if not armijo:
            hi = t
            t = 0.5 * (lo + hi)
            continue
        gt = _fd_grad(f, x + t * p, ft, h)
        if float(gt @ p) < c2 * g0p and math.isfinite(float(gt @ p)):
            lo = t
            t = 2.0 * t if hi == math.inf else 0.5 * (lo + hi)
            continue
        return t, ft, gt
    return None


def fd_baseline(variant="bfgs", h=None):
    """Solver callable ``(fun, x0, max_evals) -> (x, f)`` for the benchmark."""
    variant = variant.lower()
    if variant not in ("bfgs", "cg"):
        raise ValueError("variant must be 'bfgs' or 'cg'")
    if h is None:
        h = DEFAULT_FD_STEP
    if h <= 0:
        raise ValueError("h must be positive")
    c2 = 0.9 if variant == "bfgs" else 0.4

    def solver(fun, x0, max_evals):
        f = _Counted(fun, max_evals)
        x = np.asarray(x0, dtype=float).copy()
        n = x.size
        try:
            fx = f(x)
            g = _fd_grad(f, x, fx, h)
            hinv = np.eye(n)
            p_prev = None
            g_prev = None
            fails = 0
            iters = 0
            while True:
                iters += 1
                if variant == "bfgs":
                    p = -hinv @ g
                else:
                    if g_prev is None or iters % (n + 1) == 0:
                        beta = 0.0
                    else:
                        beta = max(0.0, float(g @ (g - g_prev))
                                   / max(float(g_prev @ g_prev), 1e-300))
                    p = -g + (beta * p_prev if p_prev is not None else 0.0)
                g0p = float(g @ p)
                if not math.isfinite(g0p) or g0p >= 0:
                    p = -g
                    g0p = float(g @ p)
                    if variant == "bfgs":
                        hinv = np.eye(n)
                    if g0p >= 0:
                        break
                gnorm = float(np.abs(g).max())
                if gnorm <= 1e-12 * max(1.0, abs(fx)):
                    break
                res = _wolfe(f, x, p, fx, g0p, None, h, 1e-4, c2)
                if res is None:
                    fails += 1
                    if fails >= 2:
                        break
                    if variant == "bfgs":
                        hinv = np.eye(n)
                    g_prev = None
                    p_prev = None
                    continue
                fails = 0
                t, ft, gt = res
                s = t * p
                y = gt - g
                if variant == "bfgs":
                    sy = float(s @ y)
                    if sy > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
                        rho = 1.0 / sy
                        v = np.eye(n) - rho * np.outer(s, y)
                        hinv = v @ hinv @ v.T + rho * np.outer(s, s)
                g_prev = g
                p_prev = p
                x = x + s
                fx = ft
                g = gt
        except _Budget:
            pass
        return x, (fx if "fx" in locals() else math.nan)

    return solver
