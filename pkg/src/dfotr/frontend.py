"""Unified entry point: problem intake, preprocessing, solver dispatch.

``solve`` classifies the problem, eliminates linear equalities, projects the
starting point for the linearly constrained driver, installs the moderated
barrier, dispatches to the selected driver, and maps the result back to the
original variables. Warnings are collected as data on the result, never
printed.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from . import drivers
from .drivers import SolveResult, SolverOptions, Status
from .problem import (Problem, ProblemType, RunRecord, _ZeroDimProblem,
                      classify, eliminate_equalities, project_start,
                      wrap_with_barrier)
from .exceptions import CallbackPanic


class SolverId(enum.Enum):
    COBYLA = "cobyla"
    UOBYQA = "uobyqa"
    NEWUOA = "newuoa"
    BOBYQA = "bobyqa"
    LINCOA = "lincoa"


_CAPABILITY = {
    SolverId.COBYLA: {ProblemType.UNCONSTRAINED, ProblemType.BOUND_CONSTRAINED,
                      ProblemType.LINEARLY_CONSTRAINED,
                      ProblemType.NONLINEARLY_CONSTRAINED},
    SolverId.LINCOA: {ProblemType.UNCONSTRAINED, ProblemType.BOUND_CONSTRAINED,
                      ProblemType.LINEARLY_CONSTRAINED},
    SolverId.BOBYQA: {ProblemType.UNCONSTRAINED, ProblemType.BOUND_CONSTRAINED},
    SolverId.NEWUOA: {ProblemType.UNCONSTRAINED},
    SolverId.UOBYQA: {ProblemType.UNCONSTRAINED},
}

_RUNNERS = {
    SolverId.COBYLA: drivers.run_cobyla,
    SolverId.UOBYQA: drivers.run_uobyqa,
    SolverId.NEWUOA: drivers.run_newuoa,
    SolverId.BOBYQA: drivers.run_bobyqa,
    SolverId.LINCOA: drivers.run_lincoa,
}


def _coerce_solver(requested):
    if requested is None or isinstance(requested, SolverId):
        return requested
    try:
        return SolverId(str(requested).lower())
    except ValueError as exc:
        raise ValueError(f"unknown solver {requested!r}") from exc


def is_capable(solver: SolverId, ptype: ProblemType, n: int) -> bool:
    if ptype not in _CAPABILITY[solver]:
        return False
    if solver is SolverId.UOBYQA and n < 2:
        return False
    return True


def select_solver(ptype: ProblemType, n: int, requested=None) -> SolverId:
    """Requested solver when capable, else the automatic rule."""
    requested = _coerce_solver(requested)
    if requested is not None and is_capable(requested, ptype, n):
        return requested
    if ptype is ProblemType.UNCONSTRAINED:
        return SolverId.UOBYQA if 2 <= n <= 8 else SolverId.NEWUOA
    if ptype is ProblemType.BOUND_CONSTRAINED:
        return SolverId.BOBYQA
    if ptype is ProblemType.LINEARLY_CONSTRAINED:
        return SolverId.LINCOA
    return SolverId.COBYLA


class _Scaling:
    """Affine map sending finite bound intervals onto [-1, 1] per coordinate."""

    def __init__(self, problem):
        both = np.isfinite(problem.lower) & np.isfinite(problem.upper) \
            & (problem.upper > problem.lower)
        self.mid = np.where(both, 0.5 * (problem.lower + problem.upper), 0.0)
        self.half = np.where(both, 0.5 * (problem.upper - problem.lower), 1.0)

    def to_scaled(self, x):
        return (np.asarray(x, dtype=float) - self.mid) / self.half

    def to_original(self, s):
        return self.mid + self.half * np.asarray(s, dtype=float)

    def apply(self, problem):
        fun = problem.objective
        obj = lambda s: fun(self.to_original(s))
        lower = self.to_scaled(problem.lower)
        upper = self.to_scaled(problem.upper)
        lin_ineq = lin_eq = None
        if problem.lin_ineq is not None:
            a, b = problem.lin_ineq
            lin_ineq = (a * self.half, b - a @ self.mid)
        if problem.lin_eq is not None:
            a, b = problem.lin_eq
            lin_eq = (a * self.half, b - a @ self.mid)
        nl_ineq = nl_eq = None
        if problem.nl_ineq is not None:
            nli = problem.nl_ineq
            nl_ineq = lambda s: nli(self.to_original(s))
        if problem.nl_eq is not None:
            nle = problem.nl_eq
            nl_eq = lambda s: nle(self.to_original(s))
        return Problem(obj, self.to_scaled(problem.x0), lower=lower, upper=upper,
                       lin_ineq=lin_ineq, lin_eq=lin_eq, nl_ineq=nl_ineq,
                       nl_eq=nl_eq)


def solve(problem: Problem, opts: SolverOptions | None = None, method=None,
          scale: bool = False) -> SolveResult:
    """Solve the problem with automatic (or requested) solver selection."""
    opts = opts or SolverOptions()
    requested = _coerce_solver(method)
    warnings = []

    scaling = None
    work = problem
    if scale:
        scaling = _Scaling(problem)
        work = scaling.apply(problem)

    reduction = None
    if work.lin_eq is not None:
        work, reduction = eliminate_equalities(work)

    if isinstance(work, _ZeroDimProblem):
        result = _solve_zero_dim(work, opts)
    else:
        ptype = classify(work)
        solver = select_solver(ptype, work.dim, requested)
        if requested is not None and solver is not requested:
            warnings.append(
                f"requested solver {requested.value} cannot handle this "
                f"{ptype.value} problem; using {solver.value} instead")
        if solver is SolverId.LINCOA:
            x0 = project_start(work.x0, work.lower, work.upper, work.lin_ineq)
            work = work.replace(x0=x0)
        result = _RUNNERS[solver](work, opts)
        result.solver = solver.value

    if reduction is not None:
        result.x = reduction.to_full(result.x)
        for e in result.history.entries:
            e.x = reduction.to_full(e.x)
    if scaling is not None:
        result.x = scaling.to_original(result.x)
        for e in result.history.entries:
            e.x = scaling.to_original(e.x)
    result.warnings = warnings + result.warnings
    _account_original_violation(problem, result)
    return result


def _solve_zero_dim(work, opts):
    """All variables are fixed by the equalities: evaluate the unique point."""
    record = RunRecord()
    status = Status.RHO_END_REACHED
    message = "all variables determined by linear equalities"
    probe = Problem(work.objective, np.zeros(1))
    wrapped = wrap_with_barrier(probe, opts.barrier, record, opts.barrier_enabled)
    try:
        wrapped.objective(np.zeros(0))
    except CallbackPanic as exc:
        status, message = Status.CALLBACK_ERROR, str(exc)
    entry = record.entries[-1] if len(record) else None
    fun = math.nan
    if entry is not None:
        fun = entry.raw if math.isfinite(entry.raw) else entry.moderated
    return SolveResult(x=np.zeros(0), fun=float(fun), status=status,
                       neval=len(record), history=record, message=message,
                       solver="none")


def _account_original_violation(problem, result):
    """Fold bound/linear violations in the original space into the result."""
    x = result.x
    if x.size != problem.dim:
        return
    viol = result.constraint_violation
    viol = max(viol, float(np.max(problem.lower - x, initial=0.0)))
    viol = max(viol, float(np.max(x - problem.upper, initial=0.0)))
    if problem.lin_ineq is not None:
        a, b = problem.lin_ineq
        viol = max(viol, float(np.max(a @ x - b, initial=0.0)))
    if problem.lin_eq is not None:
        a, b = problem.lin_eq
        viol = max(viol, float(np.abs(a @ x - b).max(initial=0.0)))
    result.constraint_violation = viol
