"""Built-in collection of classic unconstrained test problems (dims 2-50).

Each problem carries its traditional starting point. ``fstar`` is the
analytic optimal value only where solvers reliably reach the global optimum;
problems with attracting local minima leave it unset so profile reference
values come from the solver pool.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["BenchProblem", "collection"]


@dataclass(frozen=True)
class BenchProblem:
    name: str
    n: int
    fn: object
    x0: np.ndarray
    fstar: float | None = None
    tags: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))


def _sphere(shift=0.0):
    def fn(x):
        d = x - shift
        return float(d @ d)

    return fn


def _quad_diag(x):
    n = x.size
    w = np.arange(1, n + 1, dtype=float)
    return float(w @ (x * x))


def _booth(x):
    return float((x[0] + 2 * x[1] - 7) ** 2 + (2 * x[0] + x[1] - 5) ** 2)


def _matyas(x):
    return float(0.26 * (x[0] ** 2 + x[1] ** 2) - 0.48 * x[0] * x[1])


def _hyperellipsoid(x):
    c = np.cumsum(x)
    return float(c @ c)


def _tridiag_lstsq(x):
    n = x.size
    r = 2.0 * x.copy()
    r[:-1] -= x[1:]
    r[1:] -= x[:-1]
    r -= 1.0
    return float(r @ r)


def _quartic_convex(x):
    return float(np.sum(x * x + x ** 4))


def _quartic_singular(x):
    return float(np.sum(x ** 4))


def _zakharov(x):
    w = 0.5 * np.arange(1, x.size + 1, dtype=float)
    s = float(w @ x)
    return float(x @ x) + s ** 2 + s ** 4


def _rosenbrock(x):
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


def _rosenbrock_ext(x):
    odd = x[0::2]
    even = x[1::2]
    return float(np.sum(100.0 * (even - odd ** 2) ** 2 + (1.0 - odd) ** 2))


def _powell_singular(x):
    total = 0.0
    for k in range(0, x.size, 4):
        x1, x2, x3, x4 = x[k:k + 4]
        total += (x1 + 10 * x2) ** 2 + 5 * (x3 - x4) ** 2 \
            + (x2 - 2 * x3) ** 4 + 10 * (x1 - x4) ** 4
    return float(total)


def _trigonometric(x):
    n = x.size
    csum = float(np.cos(x).sum())
    i = np.arange(1, n + 1, dtype=float)
    r = n - csum + i * (1.0 - np.cos(x)) - np.sin(x)
    return float(r @ r)


def _chebyquad(x):
    n = x.size
    t_prev = np.ones(n)
    t_cur = 2.0 * x - 1.0
    total = 0.0
    for i in range(1, n + 1):
        mean = float(t_cur.mean())
        integral = 0.0 if i % 2 == 1 else -1.0 / (i * i - 1.0)
        total += (mean - integral) ** 2
        t_next = 2.0 * (2.0 * x - 1.0) * t_cur - t_prev
        t_prev, t_cur = t_cur, t_next
    return float(total)


def _beale(x):
    return float((1.5 - x[0] + x[0] * x[1]) ** 2
                 + (2.25 - x[0] + x[0] * x[1] ** 2) ** 2
                 + (2.625 - x[0] + x[0] * x[1] ** 3) ** 2)


def _freudenstein_roth(x):
    f1 = -13.0 + x[0] + ((5.0 - x[1]) * x[1] - 2.0) * x[1]
    f2 = -29.0 + x[0] + ((x[1] + 1.0) * x[1] - 14.0) * x[1]
    return float(f1 * f1 + f2 * f2)


def _himmelblau(x):
    return float((x[0] ** 2 + x[1] - 11) ** 2 + (x[0] + x[1] ** 2 - 7) ** 2)


def _wood(x):
    return float(100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2
                 + 90 * (x[3] - x[2] ** 2) ** 2 + (1 - x[2]) ** 2
                 + 10.1 * ((x[1] - 1) ** 2 + (x[3] - 1) ** 2)
                 + 19.8 * (x[1] - 1) * (x[3] - 1))


def _dixon_price(x):
    i = np.arange(2, x.size + 1, dtype=float)
    return float((x[0] - 1.0) ** 2
                 + np.sum(i * (2.0 * x[1:] ** 2 - x[:-1]) ** 2))


def _variably_dimensioned(x):
    j = np.arange(1, x.size + 1, dtype=float)
    s = float(j @ (x - 1.0))
    return float(np.sum((x - 1.0) ** 2) + s ** 2 + s ** 4)


def _penalty1(x):
    return float(1e-5 * np.sum((x - 1.0) ** 2) + (float(x @ x) - 0.25) ** 2)


def _broyden_tridiagonal(x):
    xm = np.concatenate([[0.0], x, [0.0]])
    r = (3.0 - 2.0 * xm[1:-1]) * xm[1:-1] - xm[:-2] - 2.0 * xm[2:] + 1.0
    return float(r @ r)


def _discrete_boundary(x):
    n = x.size
    h = 1.0 / (n + 1)
    t = h * np.arange(1, n + 1)
    xm = np.concatenate([[0.0], x, [0.0]])
    r = 2.0 * xm[1:-1] - xm[:-2] - xm[2:] + 0.5 * h * h * (xm[1:-1] + t + 1.0) ** 3
    return float(r @ r)


def _arwhead(x):
    return float(np.sum((x[:-1] ** 2 + x[-1] ** 2) ** 2 - 4.0 * x[:-1] + 3.0))


def _rosen_x0(n):
    x0 = np.empty(n)
    x0[0::2] = -1.2
    x0[1::2] = 1.0
    return x0


def collection():
    """Deterministic list of benchmark problems; identical on every call."""
    convex = frozenset({"convex"})
    convex_sos = frozenset({"convex", "sum-of-squares"})
    sos = frozenset({"sum-of-squares", "nonconvex"})
    noncvx = frozenset({"nonconvex"})

    probs = [
        BenchProblem("sphere2", 2, _sphere(), 3.0 * np.ones(2), 0.0, convex),
        BenchProblem("sphere10", 10, _sphere(), 3.0 * np.ones(10), 0.0, convex),
        BenchProblem("sphere50", 50, _sphere(), 3.0 * np.ones(50), 0.0, convex),
        BenchProblem("shifted_sphere30", 30, _sphere(0.5), -np.ones(30), 0.0, convex),
        BenchProblem("quad_diag8", 8, _quad_diag, np.ones(8), 0.0, convex),
        BenchProblem("booth", 2, _booth, np.zeros(2), 0.0, convex_sos),
        BenchProblem("matyas", 2, _matyas, np.array([1.0, 1.0]), 0.0, convex),
        BenchProblem("hyperellipsoid10", 10, _hyperellipsoid,
                     0.5 * np.ones(10), 0.0, convex),
        BenchProblem("tridiag_lstsq12", 12, _tridiag_lstsq, np.zeros(12), 0.0,
                     convex_sos),
        BenchProblem("quartic_convex5", 5, _quartic_convex, 2.0 * np.ones(5),
                     0.0, convex),
        BenchProblem("quartic_singular5", 5, _quartic_singular,
                     2.0 * np.ones(5), 0.0, convex),
        BenchProblem("zakharov5", 5, _zakharov, np.ones(5), 0.0, convex),
        BenchProblem("rosenbrock2", 2, _rosenbrock, np.array([-1.2, 1.0]),
                     0.0, sos),
        BenchProblem("rosenbrock_ext10", 10, _rosenbrock_ext, _rosen_x0(10),
                     0.0, sos),
        BenchProblem("rosenbrock_ext20", 20, _rosenbrock_ext, _rosen_x0(20),
                     0.0, sos),
        BenchProblem("rosenbrock_chained6", 6, _rosenbrock,
                     _rosen_x0(6), 0.0, sos),
        BenchProblem("powell_singular4", 4, _powell_singular,
                     np.array([3.0, -1.0, 0.0, 1.0]), 0.0, sos),
        BenchProblem("powell_singular8", 8, _powell_singular,
                     np.array([3.0, -1.0, 0.0, 1.0] * 2), 0.0, sos),
        BenchProblem("trigonometric10", 10, _trigonometric,
                     np.full(10, 0.1), 0.0, sos),
        BenchProblem("chebyquad6", 6, _chebyquad,
                     np.arange(1, 7) / 7.0, 0.0, sos),
        BenchProblem("chebyquad8", 8, _chebyquad,
                     np.arange(1, 9) / 9.0, None, sos),
        BenchProblem("beale", 2, _beale, np.array([1.0, 1.0]), 0.0, sos),
        BenchProblem("freudenstein_roth", 2, _freudenstein_roth,
                     np.array([0.5, -2.0]), None, sos),
        BenchProblem("himmelblau", 2, _himmelblau, np.array([1.0, 1.0]),
                     0.0, noncvx),
        BenchProblem("wood4", 4, _wood, np.array([-3.0, -1.0, -3.0, -1.0]),
                     0.0, sos),
        BenchProblem("dixon_price10", 10, _dixon_price, 2.0 * np.ones(10),
                     0.0, noncvx),
        BenchProblem("variably_dim10", 10, _variably_dimensioned,
                     1.0 - np.arange(1, 11) / 10.0, 0.0, sos),
        BenchProblem("penalty1_10", 10, _penalty1,
                     np.arange(1.0, 11.0), None, sos),
        BenchProblem("broyden_tridiag12", 12, _broyden_tridiagonal,
                     -np.ones(12), 0.0, sos),
        BenchProblem("discrete_boundary10", 10, _discrete_boundary,
                     (np.arange(1, 11) / 11.0) * (np.arange(1, 11) / 11.0 - 1.0),
                     0.0, sos),
        BenchProblem("arwhead16", 16, _arwhead, np.ones(16), 0.0, noncvx),
    ]
    for p in probs:
        assert p.x0.size == p.n, p.name
    return probs
