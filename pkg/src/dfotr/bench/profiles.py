"""Convergence test and averaged performance profiles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["convergence_cost", "profiles", "ProfileData"]


def convergence_cost(history, f0, fstar, tau):
    """Evaluations needed to close a (1 - tau) fraction of the optimality gap.

    ``history`` holds true objective values in evaluation order (a RunRecord
    is accepted and read through its raw values). Returns math.inf when the
    test is never satisfied.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    values = getattr(history, "raw_values", None)
    vals = values() if callable(values) else np.asarray(history, dtype=float)
    gap = f0 - fstar
    threshold = f0 - (1.0 - tau) * gap
    for k, v in enumerate(vals, start=1):
        if math.isfinite(v) and v <= threshold:
            return k
    return math.inf


@dataclass
class ProfileData:
    """Per-solver step curves of fraction solved against log2 normalized cost."""

    tau: float
    alphas: np.ndarray
    curves: dict
    runs: int
    fstar: dict = field(default_factory=dict)
    all_failed: list = field(default_factory=list)


def _single_run_curves(costs, alphas):
    """costs: (n_solvers, n_problems) extended reals -> curves on the grid."""
    n_solvers, n_problems = costs.shape
    best = np.full(n_problems, math.inf)
    for p in range(n_problems):
        finite = costs[:, p][np.isfinite(costs[:, p])]
        if finite.size:
            best[p] = finite.min()
    curves = np.zeros((n_solvers, alphas.size))
    for s in range(n_solvers):
        for p in range(n_problems):
            if not math.isfinite(best[p]) or not math.isfinite(costs[s, p]):
                continue
            ratio = costs[s, p] / best[p]
            curves[s] += (np.log2(ratio) <= alphas + 1e-12)
    return curves / max(n_problems, 1)


def profiles(costs, tau=0.0, solver_names=None, grid_points=201):
    """Averaged performance profiles from a cost matrix.

    ``costs`` has shape (n_solvers, n_problems) for a single run or
    (n_solvers, n_problems, n_runs); run curves are averaged pointwise.
    Costs are normalized per problem by the best finite cost of that run;
    a problem no solver finishes counts against every curve.
    """
    costs = np.asarray(costs, dtype=float)
    if costs.ndim == 2:
        costs = costs[:, :, None]
    if costs.size == 0:
        raise ValueError("cost matrix is empty")
    n_solvers, n_problems, n_runs = costs.shape
    if solver_names is None:
        solver_names = [f"solver{i}" for i in range(n_solvers)]

    max_alpha = 1.0
    for r in range(n_runs):
        for p in range(n_problems):
            col = costs[:, p, r]
            finite = col[np.isfinite(col)]
            if finite.size:
                ratios = finite / finite.min()
                max_alpha = max(max_alpha, float(np.log2(ratios.max())))
    alphas = np.linspace(0.0, math.ceil(max_alpha) + 1.0, grid_points)

    total = np.zeros((n_solvers, alphas.size))
    for r in range(n_runs):
        total += _single_run_curves(costs[:, :, r], alphas)
    curves = {name: total[i] / n_runs for i, name in enumerate(solver_names)}

    all_failed = [p for p in range(n_problems)
                  if not np.any(np.isfinite(costs[:, p, :]))]
    return ProfileData(tau=tau, alphas=alphas, curves=curves, runs=n_runs,
                       all_failed=all_failed)
