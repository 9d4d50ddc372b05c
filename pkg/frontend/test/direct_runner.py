#!/usr/bin/env python3
"""Direct (no-bridge) reference solves for the binding parity tests.

Objectives here mirror the TypeScript implementations operation for
operation, so both sides produce bitwise-identical float64 values.
Usage: python3 direct_runner.py <problem-id>
"""

import json
import sys

import numpy as np

import dfotr
from dfotr.drivers import SolverOptions


def sphere3(x):
    s = 0.0
    for i in range(3):
        s += x[i] * x[i]
    return s


def shifted4(x):
    s = 0.0
    for i in range(4):
        d = x[i] - 0.5
        s += d * d
    return s


def cross2(x):
    return x[0] * x[0] + 4.0 * (x[1] * x[1]) + x[0] * x[1]


def rosen2(x):
    a = x[1] - x[0] * x[0]
    b = 1.0 - x[0]
    return 100.0 * (a * a) + b * b


def quartic2(x):
    s = 0.0
    for i in range(2):
        a = x[i] * x[i]
        s += a * a
    return s


def box2(x):
    d0 = x[0] - 2.0
    d1 = x[1] + 2.0
    return d0 * d0 + d1 * d1


def lin2(x):
    d0 = x[0] - 1.0
    d1 = x[1] - 2.0
    return d0 * d0 + d1 * d1


def cob2(x):
    return -x[0] - 2.0 * x[1]


def trid3(x):
    s = 0.0
    for i in range(3):
        d = x[i] - 1.0
        s += d * d
    s -= x[0] * x[1]
    s -= x[1] * x[2]
    return s


def auto9(x):
    s = 0.0
    for i in range(9):
        s += (i + 1.0) * (x[i] * x[i])
    return s


def cob2_ineq(x):
    v = 2.0 - x[0] - x[1]
    return np.array([-v])


PROBLEMS = {
    "sphere3": dict(fn=sphere3, x0=[1.0, 2.0, 3.0], method=None),
    "shifted4": dict(fn=shifted4, x0=[0.0, 0.0, 0.0, 0.0], method="newuoa"),
    "cross2": dict(fn=cross2, x0=[1.0, 1.0], method="newuoa"),
    "rosen2": dict(fn=rosen2, x0=[-1.2, 1.0], method="newuoa"),
    "quartic2": dict(fn=quartic2, x0=[1.5, -2.0], method="uobyqa"),
    "box2": dict(fn=box2, x0=[0.5, 0.5], method="bobyqa",
                 lower=[0.0, 0.0], upper=[1.0, 1.0]),
    "lin2": dict(fn=lin2, x0=[0.0, 0.0], method="lincoa",
                 lin_ineq=(np.array([[1.0, 1.0]]), np.array([2.0]))),
    "cob2": dict(fn=cob2, x0=[0.25, 0.25], method="cobyla",
                 lower=[0.0, 0.0], upper=[1.0, 1.0], nl_ineq=cob2_ineq),
    "trid3": dict(fn=trid3, x0=[0.0, 0.0, 0.0], method="uobyqa"),
    "auto9": dict(fn=auto9, x0=[1.0] * 9, method=None),
}


def main():
    spec = dict(PROBLEMS[sys.argv[1]])
    fn = spec.pop("fn")
    x0 = spec.pop("x0")
    method = spec.pop("method")
    wrapped = lambda x: float(fn(x))
    problem = dfotr.Problem(wrapped, x0, **spec)
    res = dfotr.solve(problem, SolverOptions(), method=method)
    print(json.dumps({
        "x": [float(v) for v in res.x],
        "fun": float(res.fun),
        "nfev": res.neval,
        "status": res.status.value,
    }))


if __name__ == "__main__":
    main()
