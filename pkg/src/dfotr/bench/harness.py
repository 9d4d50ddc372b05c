"""Experiment harness: run solver pools over the collection and build profiles.

Every (level, problem, solver, run) cell owns an independent RNG stream
derived from the master seed and the cell indices, so results do not depend
on execution order. Histories record the true objective value at every
evaluation; solvers only ever see the contaminated values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..drivers import SolverOptions
from ..frontend import solve
from ..problem import Problem
from .baselines import fd_baseline
from .problems import collection
from .profiles import ProfileData, convergence_cost, profiles
from .wrappers import failing, noisy

DFOTR_TOKENS = ("auto", "newuoa", "uobyqa", "bobyqa", "lincoa", "cobyla")
BASELINE_TOKENS = ("bfgs", "cg")


def parse_solver_token(token):
    """(kind, base, barrier_enabled) for a solver token."""
    tok = token.strip().lower()
    nobarrier = tok.endswith("-nobarrier")
    base = tok[:-len("-nobarrier")] if nobarrier else tok
    if base in BASELINE_TOKENS:
        if nobarrier:
            raise ValueError(f"{token}: baselines have no barrier to disable")
        return "baseline", base, True
    if base in DFOTR_TOKENS:
        return "dfotr", base, not nobarrier
    raise ValueError(f"unknown solver token {token!r}")


def _cell_rng(seed, level_idx, run_idx, prob_idx, solver_idx):
    ss = np.random.SeedSequence([int(seed), level_idx, run_idx, prob_idx,
                                 solver_idx])
    return np.random.default_rng(ss)


def run_cell(bench_problem, token, kind, level, budget, rng):
    """One solver run on one contaminated problem; returns true-value history."""
    hist = []
    truth = bench_problem.fn

    def recorded(x):
        v = float(truth(np.asarray(x, dtype=float)))
        hist.append(v)
        return v

    if kind == "noise":
        contaminated = noisy(recorded, level, rng)
    elif kind == "nan":
        contaminated = failing(recorded, level, rng)
    else:
        raise ValueError(f"unknown experiment kind {kind!r}")

    skind, base, barrier = parse_solver_token(token)
    if skind == "baseline":
        fd_baseline(base)(contaminated, bench_problem.x0, budget)
    else:
        opts = SolverOptions(rho_beg=1.0, rho_end=1e-6, max_evals=budget,
                             barrier_enabled=barrier)
        method = None if base == "auto" else base
        problem = Problem(contaminated, bench_problem.x0)
        try:
            solve(problem, opts, method=method)
        except Exception:  # noqa: BLE001 - a crashed run scores as a failure
            pass
    return hist


@dataclass
class ExperimentResult:
    kind: str
    levels: list
    taus: list
    solvers: list
    runs: int
    seed: int
    problems: list
    histories: dict = field(default_factory=dict)
    f0: dict = field(default_factory=dict)
    fstar: dict = field(default_factory=dict)
    costs: dict = field(default_factory=dict)
    profiles: dict = field(default_factory=dict)


def run_experiment(kind, levels, taus, solver_tokens, runs, seed,
                   budget_mult=500, problems=None, max_dim=None,
                   grid_points=201):
    """Run the full (level x solver x problem x run) matrix and build profiles.

    For contaminated levels an extra clean run (level 0) per solver feeds the
    reference value pool; reference values combine the pool minimum with the
    analytic optimum when one is recorded.
    """
    for tok in solver_tokens:
        parse_solver_token(tok)
    probs = list(problems) if problems is not None else collection()
    if max_dim is not None:
        probs = [p for p in probs if p.n <= max_dim]
    if not probs:
        raise ValueError("no problems selected")

    result = ExperimentResult(kind=kind, levels=list(levels), taus=list(taus),
                              solvers=list(solver_tokens), runs=runs,
                              seed=seed, problems=probs)

    for li, level in enumerate(levels):
        n_extra = 1 if level != 0 else 0
        hists = {}
        for pi, prob in enumerate(probs):
            budget = budget_mult * prob.n
            for si, tok in enumerate(solver_tokens):
                for r in range(runs + n_extra):
                    lvl = level if r < runs else 0.0
                    rng = _cell_rng(seed, li, r, pi, si)
                    hists[(si, pi, r)] = run_cell(prob, tok, kind, lvl,
                                                  budget, rng)
        result.histories[level] = hists

        f0 = np.array([p.fn(p.x0) for p in probs])
        fstar = np.empty(len(probs))
        for pi, prob in enumerate(probs):
            pool = math.inf
            for si in range(len(solver_tokens)):
                for r in range(runs + n_extra):
                    h = hists[(si, pi, r)]
                    finite = [v for v in h if math.isfinite(v)]
                    if finite:
                        pool = min(pool, min(finite))
            if prob.fstar is not None:
                pool = min(pool, prob.fstar)
            fstar[pi] = pool
        result.f0[level] = f0
        result.fstar[level] = fstar

        for tau in taus:
            costs = np.full((len(solver_tokens), len(probs), runs), math.inf)
            for si in range(len(solver_tokens)):
                for pi in range(len(probs)):
                    if not math.isfinite(fstar[pi]) or f0[pi] <= fstar[pi]:
                        continue
                    for r in range(runs):
                        costs[si, pi, r] = convergence_cost(
                            hists[(si, pi, r)], f0[pi], fstar[pi], tau)
            result.costs[(level, tau)] = costs
            result.profiles[(level, tau)] = profiles(
                costs, tau=tau, solver_names=list(solver_tokens),
                grid_points=grid_points)
    return result


def solved_fraction(profile: ProfileData, solver: str) -> float:
    """Terminal value of a solver's curve: fraction of problems ever solved."""
    return float(profile.curves[solver][-1])
