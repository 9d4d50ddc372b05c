#!/usr/bin/env python3
"""Stdio bridge: one solve per process, line-delimited JSON.

The host sends a configuration object on the first line, then answers
evaluation requests until the final result line is emitted:

  bridge -> host  {"type": "eval",    "x": [...]}
  bridge -> host  {"type": "evalCon", "kind": "ineq"|"eq", "x": [...]}
  host -> bridge  {"value": <num | "NaN" | "Infinity" | "-Infinity">}
                  {"values": [...]} for constraints, or {"error": "..."}
  bridge -> host  {"type": "result", ...}

Objective calls are counted on this side, including a call whose reply is an
error, so the reported nfev matches the number of times the host callback
was entered.
"""

import json
import math
import sys

import numpy as np

import dfotr
from dfotr.drivers import SolverOptions


def _encode(v):
    v = float(v)
    if math.isnan(v):
        return "NaN"
    if v == math.inf:
        return "Infinity"
    if v == -math.inf:
        return "-Infinity"
    return v


def _decode(v):
    return float(v)


class HostError(RuntimeError):
    pass


class Host:
    def __init__(self, stdin, stdout):
        self.stdin = stdin
        self.stdout = stdout
        self.neval = 0

    def ask(self, message):
        self.stdout.write(json.dumps(message) + "\n")
        self.stdout.flush()
        line = self.stdin.readline()
        if not line:
            raise HostError("host closed the stream")
        reply = json.loads(line)
        if "error" in reply:
            raise HostError(str(reply["error"]))
        return reply

    def objective(self, x):
        self.neval += 1
        reply = self.ask({"type": "eval", "x": [float(t) for t in np.asarray(x)]})
        return _decode(reply["value"])

    def constraints(self, kind):
        def call(x):
            reply = self.ask({"type": "evalCon", "kind": kind,
                              "x": [float(t) for t in np.asarray(x)]})
            return np.array([_decode(v) for v in reply["values"]], dtype=float)

        return call


def _bound_array(values, n, sign):
    if values is None:
        return None
    out = np.empty(n)
    for i, v in enumerate(values):
        out[i] = (sign * math.inf) if v is None else float(v)
    return out


def _pair(cfg, key):
    block = cfg.get(key)
    if not block:
        return None
    return np.asarray(block["a"], dtype=float), np.asarray(block["b"], dtype=float)


def main():
    stdin = sys.stdin
    stdout = sys.stdout
    cfg = json.loads(stdin.readline())
    host = Host(stdin, stdout)

    x0 = np.asarray(cfg["x0"], dtype=float)
    n = x0.size
    status = "error"
    message = ""
    warnings = []
    x_out = [float(v) for v in x0]
    fun = "NaN"
    cviol = 0.0
    success = False
    try:
        problem = dfotr.Problem(
            host.objective, x0,
            lower=_bound_array(cfg.get("lower"), n, -1),
            upper=_bound_array(cfg.get("upper"), n, +1),
            lin_ineq=_pair(cfg, "linIneq"),
            lin_eq=_pair(cfg, "linEq"),
            nl_ineq=host.constraints("ineq") if cfg.get("hasNlIneq") else None,
            nl_eq=host.constraints("eq") if cfg.get("hasNlEq") else None,
        )
        raw = cfg.get("options") or {}
        opts = SolverOptions()
        for src, dst in (("rhoBeg", "rho_beg"), ("rhoEnd", "rho_end"),
                         ("npt", "npt"), ("maxEvals", "max_evals"),
                         ("target", "target")):
            if raw.get(src) is not None:
                setattr(opts, dst, raw[src])
        result = dfotr.solve(problem, opts, method=cfg.get("method"),
                             scale=bool(cfg.get("scale", False)))
        status = result.status.value
        message = result.message
        warnings = list(result.warnings)
        x_out = [float(v) for v in result.x]
        fun = _encode(result.fun)
        cviol = _encode(result.constraint_violation)
        success = result.status.value in ("rho-end-reached", "target-reached")
    except HostError as exc:
        status = "callback-error"
        message = str(exc)
    except Exception as exc:  # noqa: BLE001 - marshal, never crash the pipe
        status = "error"
        message = f"{type(exc).__name__}: {exc}"

    stdout.write(json.dumps({
        "type": "result",
        "x": x_out,
        "fun": fun,
        "nfev": host.neval,
        "status": status,
        "message": message,
        "warnings": warnings,
        "success": success,
        "constraintViolation": cviol,
    }) + "\n")
    stdout.flush()


if __name__ == "__main__":
    main()
