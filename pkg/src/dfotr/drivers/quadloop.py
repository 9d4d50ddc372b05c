"""Main loop shared by the quadratic-model drivers.

One iteration solves the trust-region subproblem, evaluates the trial point,
admits it into the interpolation set by dropping the point with the best
weighted denominator, and rebuilds the model. When the step is short or the
reduction ratio poor, the loop repairs geometry (moving the farthest point to
a ball maximizer of its Lagrange function), shrinks the radius toward the
resolution floor, or lowers the resolution itself until it reaches rho_end.
"""

from __future__ import annotations

import math

import numpy as np

from .. import models, subproblems
from ..exceptions import (AllTinyDenominators, CallbackPanic, DegenerateSet,
                          DimensionTooSmall, InfeasibleBounds, SingularKKT,
                          TinyDenominator)
from ..problem import RunRecord, best_of_record, wrap_with_barrier
from .base import (SolveResult, SolverOptions, Status, TrustRegionState,
                   emit_trace, reduce_rho, select_drop_tr, update_radius)

_SHORT_STEP = 0.5
_FAR_FACTOR = 2.0
_BASE_SHIFT_FACTOR = 10.0


class _Finish(Exception):
    def __init__(self, status, message=""):
        self.status = status
        self.message = message


class _Evaluator:
    def __init__(self, objective, record, max_evals, target):
        self.objective = objective
        self.record = record
        self.max_evals = max_evals
        self.target = target

    @property
    def neval(self):
        return len(self.record)

    def budget_left(self):
        return self.neval < self.max_evals

    def __call__(self, x, initial=False):
        if not initial and not self.budget_left():
            raise _Finish(Status.MAX_EVALS)
        fmod = self.objective(x)
        entry = self.record.entries[-1]
        if self.target is not None and math.isfinite(entry.raw) \
                and entry.raw <= self.target:
            raise _Finish(Status.TARGET_REACHED)
        return fmod


def run_newuoa(problem, opts: SolverOptions | None = None) -> SolveResult:
    """Underdetermined quadratic interpolation, unconstrained."""
    _require_unconstrained(problem, "newuoa")
    return _quadratic_loop(problem, opts or SolverOptions(), "newuoa")


def run_uobyqa(problem, opts: SolverOptions | None = None) -> SolveResult:
    """Fully determined quadratic interpolation, unconstrained, n >= 2."""
    _require_unconstrained(problem, "uobyqa")
    if problem.dim < 2:
        raise DimensionTooSmall("this driver cannot handle univariate problems")
    return _quadratic_loop(problem, opts or SolverOptions(), "uobyqa")


def run_bobyqa(problem, opts: SolverOptions | None = None) -> SolveResult:
    """Bound-constrained driver; every evaluation stays inside the box."""
    if problem.lin_ineq is not None or problem.lin_eq is not None \
            or problem.nl_ineq is not None or problem.nl_eq is not None:
        raise ValueError("bobyqa driver accepts bounds only")
    if np.any(problem.lower > problem.upper):
        raise InfeasibleBounds("lower bound exceeds upper bound")
    return _quadratic_loop(problem, opts or SolverOptions(), "bobyqa")


def run_lincoa(problem, opts: SolverOptions | None = None) -> SolveResult:
    """Linearly constrained driver (bounds are folded into the rows)."""
    if problem.nl_ineq is not None or problem.nl_eq is not None:
        raise ValueError("lincoa driver accepts linear constraints at most")
    if problem.lin_eq is not None:
        raise ValueError("eliminate linear equalities before calling lincoa")
    return _quadratic_loop(problem, opts or SolverOptions(), "lincoa")


def _require_unconstrained(problem, name):
    if problem.has_finite_bounds() or problem.lin_ineq is not None \
            or problem.lin_eq is not None or problem.nl_ineq is not None \
            or problem.nl_eq is not None:
        raise ValueError(f"{name} driver requires an unconstrained problem")


def _linear_rows(problem):
    """Linear inequality rows including finite bounds, for the lincoa class."""
    rows = []
    rhs = []
    n = problem.dim
    if problem.lin_ineq is not None:
        a, b = problem.lin_ineq
        rows.append(np.array(a, dtype=float))
        rhs.append(np.array(b, dtype=float))
    for i in range(n):
        if np.isfinite(problem.upper[i]):
            e = np.zeros(n)
            e[i] = 1.0
            rows.append(e[None, :])
            rhs.append(np.array([problem.upper[i]]))
        if np.isfinite(problem.lower[i]):
            e = np.zeros(n)
            e[i] = -1.0
            rows.append(e[None, :])
            rhs.append(np.array([-problem.lower[i]]))
    if not rows:
        return None, None
    return np.vstack(rows), np.concatenate(rhs)


def _quadratic_loop(problem, opts, solver):
    opts.validate()
    n = problem.dim

    lower = upper = None
    rho_beg = opts.rho_beg
    rho_end = min(opts.rho_end, rho_beg)
    x0 = problem.x0.copy()
    fixed = None
    if solver == "bobyqa":
        lower = problem.lower.copy()
        upper = problem.upper.copy()
        fixed = np.isfinite(lower) & np.isfinite(upper) & (upper - lower <= 0)
        if np.any(fixed):
            return _run_with_fixed(problem, opts, fixed)
        widths = upper - lower
        finite_w = widths[np.isfinite(widths)]
        if finite_w.size:
            rho_beg = min(rho_beg, 0.5 * float(finite_w.min()))
            rho_end = min(rho_end, rho_beg)
        x0 = np.clip(x0, lower, upper)
        # Leave room for the initial pattern unless x0 sits exactly on a bound.
        room = widths >= 2 * rho_beg
        near_lo = (x0 - lower < rho_beg) & (x0 > lower) & room
        near_hi = (upper - x0 < rho_beg) & (x0 < upper) & room
        x0[near_lo] = lower[near_lo] + rho_beg
        x0[near_hi] = upper[near_hi] - rho_beg

    a_ub = b_ub = None
    b_orig = None
    if solver == "lincoa":
        a_ub, b_ub = _linear_rows(problem)
        if a_ub is not None:
            b_orig = b_ub.copy()
            slack = a_ub @ x0 - b_ub
            if np.any(slack > 0):
                # Infeasible start: relax the offending right-hand sides and
                # solve the modified problem, reporting violation against the
                # original data.
                b_ub = np.maximum(b_ub, a_ub @ x0)

    variant = models.Variant.QUADRATIC_FULL if solver == "uobyqa" \
        else models.Variant.QUADRATIC_KKT
    if solver == "uobyqa":
        npt = models.npt_full(n)
        if opts.npt is not None and opts.npt != npt:
            _raise_bad_npt(opts.npt, solver)
    else:
        npt = opts.resolved_npt(n)
    max_evals = opts.resolved_max_evals(n)

    record = RunRecord()
    wrapped = wrap_with_barrier(problem, opts.barrier, record, opts.barrier_enabled)
    evaluate = _Evaluator(wrapped.objective, record, max_evals, opts.target)

    status = Status.RHO_END_REACHED
    message = ""
    try:
        iset, points = models.init_set(x0, rho_beg, npt, variant, lower, upper)
        for k in range(iset.npt):
            evaluate(points[k], initial=True)
            iset.fvals[k] = record.entries[-1].moderated
        state = TrustRegionState(x_k=x0.copy(), delta=rho_beg, rho=rho_beg,
                                 rho_beg=rho_beg, rho_end=rho_end)
        _run_main_loop(iset, state, evaluate, opts, solver,
                       lower, upper, a_ub, b_ub)
    except _Finish as fin:
        status = fin.status
        message = fin.message
    except CallbackPanic as exc:
        status = Status.CALLBACK_ERROR
        message = str(exc)
    except (SingularKKT, DegenerateSet) as exc:
        message = f"terminated on degenerate interpolation geometry: {exc}"

    return _finalize(problem, record, status, message, solver, a_ub, b_orig)


def _raise_bad_npt(npt, solver):
    from ..exceptions import BadNpt

    raise BadNpt(f"npt={npt} is not legal for {solver}")


def _run_with_fixed(problem, opts, fixed):
    """Solve a box problem with pinned coordinates in the free subspace."""
    free = ~fixed
    pinned = problem.lower[fixed]
    fun = problem.objective
    n = problem.dim

    def embed(z):
        x = np.empty(n)
        x[fixed] = pinned
        x[free] = z
        return x

    if not np.any(free):
        from ..problem import Problem

        record = RunRecord()
        wrapped = wrap_with_barrier(
            Problem(fun, problem.x0), opts.barrier, record, opts.barrier_enabled)
        try:
            wrapped.objective(embed(np.zeros(0)))
            status = Status.RHO_END_REACHED
            message = "all variables fixed by the bounds"
        except CallbackPanic as exc:
            status, message = Status.CALLBACK_ERROR, str(exc)
        return _finalize(problem, record, status, message, "bobyqa", None, None)

    from ..problem import Problem

    sub = Problem(lambda z: fun(embed(z)), problem.x0[free],
                  lower=problem.lower[free], upper=problem.upper[free])
    res = run_bobyqa(sub, opts)
    res.x = embed(res.x)
    for e in res.history.entries:
        e.x = embed(e.x)
    return res


def _center_key(solver, fval, viol, feas_tol):
    if solver == "lincoa":
        return (viol > feas_tol, fval, viol)
    return (fval,)


def _set_center(iset, solver, a_ub, b_ub, feas_tol):
    if solver == "lincoa" and a_ub is not None:
        viol = np.maximum(a_ub @ iset.points.T - b_ub[:, None], 0.0).max(axis=0)
    else:
        viol = np.zeros(iset.npt)
    keys = [_center_key(solver, iset.fvals[j], viol[j], feas_tol)
            for j in range(iset.npt)]
    iset.center_index = min(range(iset.npt), key=lambda j: (keys[j], j))


def _build_model(iset, solver, prev):
    if solver == "uobyqa":
        return models.build_full_quadratic(iset)
    return models.update_underdetermined(prev, iset)


def _tr_step(model, state, solver, lower, upper, a_ub, b_ub):
    g_k = model.grad(state.x_k)
    H = model.hessian()
    if solver == "uobyqa":
        return subproblems.more_sorensen(g_k, H, state.delta)
    if solver == "bobyqa":
        return subproblems.tcg_bounds(g_k, H, state.delta, lower, upper, state.x_k)
    if solver == "lincoa":
        return subproblems.tcg_linear(g_k, H, state.delta, a_ub, b_ub, state.x_k)
    step = subproblems.truncated_cg(g_k, H, state.delta)
    if step.on_boundary:
        d = subproblems.two_dim_refine(model, step.step, state.x_k, state.delta)
        red = -(float(g_k @ d) + 0.5 * float(d @ (H @ d)))
        if red > step.predicted_reduction:
            step.step = d
            step.predicted_reduction = red
    return step


def _geometry_point(iset, drop, state, solver, deltabar, lower, upper, a_ub, b_ub):
    lag = models.lagrange(iset, drop)
    if solver == "uobyqa":
        return subproblems.geo_uobyqa(lag, state.x_k, deltabar)
    if solver == "bobyqa":
        return subproblems.geo_bobyqa(lag, iset, drop, state.x_k, deltabar,
                                      lower, upper)
    if solver == "lincoa":
        return subproblems.geo_lincoa(lag, iset, drop, state.x_k, deltabar,
                                      a_ub, b_ub)
    return subproblems.geo_newuoa(lag, iset, drop, state.x_k, deltabar)


def _run_main_loop(iset, state, evaluate, opts, solver, lower, upper, a_ub, b_ub):
    n = iset.n
    power = 3 if solver == "uobyqa" else 6
    feas_tol = 1e-8 * max(1.0, float(np.abs(b_ub).max())) if b_ub is not None else 0.0
    _set_center(iset, solver, a_ub, b_ub, feas_tol)
    state.x_k = iset.points[iset.center_index].copy()
    model = _build_model(iset, solver, None)
    itmax = 50 * evaluate.max_evals + 1000

    while state.iteration < itmax:
        state.iteration += 1
        emit_trace(opts, state, evaluate.neval,
                   float(iset.fvals[iset.center_index]),
                   float(iset.fvals[iset.center_index]))

        if not model.is_finite():
            if not opts.barrier_enabled:
                raise _Finish(Status.CALLBACK_ERROR,
                              "non-finite model coefficients with the barrier disabled")
            iset.refactorize()
            model = _build_model(iset, solver, None)
            if not model.is_finite():
                raise _Finish(Status.RHO_END_REACHED,
                              "model reset failed; stopping with finite state")

        try:
            step = _tr_step(model, state, solver, lower, upper, a_ub, b_ub)
        except (np.linalg.LinAlgError, ValueError):
            # Extreme model coefficients can defeat the factorizations; treat
            # as a null step so the geometry/resolution phase takes over.
            step = subproblems.TrustRegionStep(step=np.zeros(n),
                                               predicted_reduction=0.0,
                                               on_boundary=False)
        d = step.step
        dnorm = float(np.linalg.norm(d))
        pred = step.predicted_reduction
        ratio = -math.inf

        took_step = dnorm >= _SHORT_STEP * state.rho and pred > 0 \
            and np.all(np.isfinite(d))
        if took_step:
            xtrial = state.x_k + d
            if solver == "bobyqa":
                xtrial = np.clip(xtrial, lower, upper)
            f_center = float(iset.fvals[iset.center_index])
            ftrial = evaluate(xtrial)
            ratio = (f_center - ftrial) / pred
            update_radius(state, ratio)
            try:
                t = select_drop_tr(iset, xtrial, state, power)
                iset.smw_replace(t, xtrial, ftrial,
                                 dup_tol=1e-14 * max(state.delta, 1e-300))
                _set_center(iset, solver, a_ub, b_ub, feas_tol)
                state.x_k = iset.points[iset.center_index].copy()
                model = _build_model(iset, solver, model)
            except (AllTinyDenominators, TinyDenominator):
                pass
            except (SingularKKT, DegenerateSet):
                iset.refactorize()
                model = _build_model(iset, solver, None)
            if float(np.linalg.norm(state.x_k - iset.base)) \
                    > _BASE_SHIFT_FACTOR * state.delta:
                models.shift_base(iset, model, state.x_k)
            if ratio >= 0.1:
                continue

        # Geometry or resolution phase.
        dists = np.linalg.norm(iset.points - state.x_k, axis=1)
        far = int(np.argmax(dists))
        handled = False
        if dists[far] > _FAR_FACTOR * state.delta:
            if not evaluate.budget_left():
                raise _Finish(Status.MAX_EVALS)
            handled = _geometry_repair(iset, state, evaluate, solver, far,
                                       dists[far], lower, upper, a_ub, b_ub)
            if handled:
                _set_center(iset, solver, a_ub, b_ub, feas_tol)
                state.x_k = iset.points[iset.center_index].copy()
                model = _build_model(iset, solver,
                                     None if solver == "uobyqa" else model)
                if float(np.linalg.norm(state.x_k - iset.base)) \
                        > _BASE_SHIFT_FACTOR * state.delta:
                    models.shift_base(iset, model, state.x_k)
                continue
        if state.delta > state.rho:
            state.delta = max(state.rho, 0.5 * state.delta)
            if state.delta <= 1.5 * state.rho:
                state.delta = state.rho
        elif state.rho > state.rho_end:
            reduce_rho(state)
        else:
            raise _Finish(Status.RHO_END_REACHED)
    raise _Finish(Status.MAX_EVALS, "iteration cap reached")


def _geometry_repair(iset, state, evaluate, solver, drop, far_dist,
                     lower, upper, a_ub, b_ub):
    """Move the dropped point to a Lagrange maximizer; False if unsafe."""
    deltabar = max(state.rho, min(state.delta, 0.5 * far_dist))
    for db in (deltabar, 0.5 * deltabar):
        gstep = _geometry_point(iset, drop, state, solver, db,
                                lower, upper, a_ub, b_ub)
        xg = gstep.point
        if solver == "bobyqa":
            xg = np.clip(xg, lower, upper)
        dens = iset.denominators_for(xg)
        scale = max(1.0, float(np.abs(dens).max(initial=0.0)))
        if abs(dens[drop]) >= 1e-12 * scale and np.isfinite(dens[drop]):
            fg = evaluate(xg)
            try:
                iset.smw_replace(drop, xg, fg,
                                 dup_tol=1e-14 * max(state.delta, 1e-300))
                return True
            except TinyDenominator:
                # The evaluation is already recorded; try the other radius.
                continue
    return False


def _finalize(problem, record, status, message, solver, a_ub, b_orig):
    warnings = []
    n = problem.dim
    if len(record) == 0:
        return SolveResult(x=problem.x0.copy(), fun=math.nan, status=status,
                           neval=0, history=record, message=message or
                           "no evaluations performed", solver=solver,
                           warnings=warnings)
    merit = None
    if solver == "lincoa" and a_ub is not None and b_orig is not None:
        feas_tol = 1e-8 * max(1.0, float(np.abs(b_orig).max()))
        merit = []
        for e in record.entries:
            viol = float(np.maximum(a_ub @ e.x - b_orig, 0.0).max())
            merit.append((viol > feas_tol, e.moderated, viol))
    best = best_of_record(record, merit=merit)
    entry = record.entries[best]
    fun = entry.raw if math.isfinite(entry.raw) else entry.moderated
    cviol = 0.0
    if a_ub is not None and b_orig is not None:
        cviol = float(np.maximum(a_ub @ entry.x - b_orig, 0.0).max())
    return SolveResult(x=entry.x.copy(), fun=float(fun), status=status,
                       neval=len(record), history=record,
                       constraint_violation=cviol, message=message,
                       solver=solver, warnings=warnings)
