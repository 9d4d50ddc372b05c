"""Linear-model driver for general (nonlinearly) constrained problems.

Objective and constraints are modeled by linear interpolation on an
(n+1)-point simplex. Trial steps come from the two-stage subproblem: first
reduce the largest violation of the linearized constraints inside the trust
region, then improve the linearized objective without increasing any greatest
violation. Progress is measured by the merit f + mu * max violation, with mu
raised on demand so predicted merit reductions stay positive. The radius is
never increased.
"""

from __future__ import annotations

import math

import numpy as np

from .. import models, subproblems
from ..exceptions import CallbackPanic, DegenerateSet, TinyDenominator
from ..problem import RunRecord, wrap_with_barrier
from .base import (SolveResult, SolverOptions, Status, TrustRegionState,
                   emit_trace, reduce_rho)

_MU_CAP = 1e12
_DIST_FACTOR = 2.1
_HEIGHT_FACTOR = 0.25
_FEAS_TOL = 1e-8


class _Finish(Exception):
    def __init__(self, status, message=""):
        self.status = status
        self.message = message


def _constraint_evaluator(problem, wrapped):
    """Internal c(x) >= 0 rows from every constraint group."""
    n = problem.dim
    parts = []
    if problem.has_finite_bounds():
        lo, hi = problem.lower, problem.upper
        fin_lo = np.where(np.isfinite(lo))[0]
        fin_hi = np.where(np.isfinite(hi))[0]
        if fin_lo.size or fin_hi.size:
            parts.append(lambda x: np.concatenate(
                [x[fin_lo] - lo[fin_lo], hi[fin_hi] - x[fin_hi]]))
    if problem.lin_ineq is not None:
        a_i, b_i = problem.lin_ineq
        parts.append(lambda x: b_i - a_i @ x)
    if problem.lin_eq is not None:
        a_e, b_e = problem.lin_eq
        parts.append(lambda x: np.concatenate([b_e - a_e @ x, a_e @ x - b_e]))
    if wrapped.nl_ineq is not None:
        nli = wrapped.nl_ineq
        parts.append(lambda x: -nli(x))
    if wrapped.nl_eq is not None:
        nle = wrapped.nl_eq
        parts.append(lambda x: np.concatenate([nle(x), -nle(x)]))
    if not parts:
        return None

    def evaluate(x):
        return np.concatenate([np.atleast_1d(p(x)) for p in parts])

    return evaluate


def _max_violation(cvec):
    if cvec is None or cvec.size == 0:
        return 0.0
    return float(max(0.0, -cvec.min()))


def run_cobyla(problem, opts: SolverOptions | None = None) -> SolveResult:
    """Two-stage linear-model trust-region driver; handles every problem type."""
    opts = opts or SolverOptions()
    opts.validate()
    n = problem.dim
    rho_beg = opts.rho_beg
    rho_end = min(opts.rho_end, rho_beg)
    max_evals = opts.resolved_max_evals(n)

    record = RunRecord()
    wrapped = wrap_with_barrier(problem, opts.barrier, record, opts.barrier_enabled)
    eval_cons = _constraint_evaluator(problem, wrapped)
    hist_viol = []

    def evaluate(x, initial=False):
        if not initial and len(record) >= max_evals:
            raise _Finish(Status.MAX_EVALS)
        fmod = wrapped.objective(x)
        cvec = eval_cons(np.asarray(x, dtype=float)) if eval_cons else None
        hist_viol.append(_max_violation(cvec) if cvec is not None else 0.0)
        entry = record.entries[-1]
        if opts.target is not None and math.isfinite(entry.raw) \
                and entry.raw <= opts.target and hist_viol[-1] <= _FEAS_TOL:
            raise _Finish(Status.TARGET_REACHED)
        return fmod, cvec

    status = Status.RHO_END_REACHED
    message = ""
    try:
        iset, points = models.init_set(problem.x0, rho_beg, n + 1,
                                       models.Variant.LINEAR_FULL)
        fvals = np.empty(n + 1)
        cvals = None
        for k in range(n + 1):
            fk, ck = evaluate(points[k], initial=True)
            fvals[k] = fk
            if ck is not None:
                if cvals is None:
                    cvals = np.empty((n + 1, ck.size))
                cvals[k] = ck
        iset.fvals = fvals
        iset.cvals = cvals
        state = TrustRegionState(x_k=points[0].copy(), delta=rho_beg, rho=rho_beg,
                                 rho_beg=rho_beg, rho_end=rho_end)
        _cobyla_loop(iset, state, evaluate, opts, record, max_evals)
    except _Finish as fin:
        status, message = fin.status, fin.message
    except CallbackPanic as exc:
        status, message = Status.CALLBACK_ERROR, str(exc)
    except DegenerateSet as exc:
        message = f"terminated on degenerate simplex: {exc}"

    return _finalize(problem, record, hist_viol, status, message)


def _merit(fval, viol, mu):
    return fval + mu * viol


def _set_center(iset, mu):
    viols = _set_viols(iset)
    keys = [( _merit(iset.fvals[j], viols[j], mu), viols[j], j)
            for j in range(iset.npt)]
    iset.center_index = min(range(iset.npt), key=lambda j: keys[j])


def _set_viols(iset):
    if iset.cvals is None:
        return np.zeros(iset.npt)
    return np.maximum(0.0, -iset.cvals.min(axis=1))


def _simplex_quality(iset, x_k, delta):
    """(acceptable, worst_far_index, worst_flat_index) of the simplex."""
    dists = np.linalg.norm(iset.points - x_k, axis=1)
    grads = iset.inverse.matrix[1:, :]
    gnorms = np.linalg.norm(grads, axis=0)
    heights = 1.0 / np.maximum(gnorms, 1e-300)
    far_ok = dists <= _DIST_FACTOR * delta
    flat_ok = heights >= _HEIGHT_FACTOR * delta
    candidates = [j for j in range(iset.npt) if j != iset.center_index]
    worst_far = max(candidates, key=lambda j: dists[j])
    worst_flat = min(candidates, key=lambda j: heights[j])
    acceptable = all(far_ok[j] and flat_ok[j] for j in candidates)
    return acceptable, (worst_far if not far_ok[worst_far] else worst_flat), dists


def _cobyla_loop(iset, state, evaluate, opts, record, max_evals):
    n = iset.n
    mu = 0.0
    _set_center(iset, mu)
    state.x_k = iset.points[iset.center_index].copy()
    itmax = 50 * max_evals + 1000

    while state.iteration < itmax:
        state.iteration += 1
        # Keep the base at the center so the interpolation system stays well
        # scaled as the iterates march away from the starting point.
        if float(np.linalg.norm(state.x_k - iset.base)) > 10.0 * state.delta:
            iset.shift_base(state.x_k)
        viols = _set_viols(iset)
        f_c = float(iset.fvals[iset.center_index])
        v_c = float(viols[iset.center_index])
        emit_trace(opts, state, len(record), f_c, _merit(f_c, v_c, mu))

        obj = models.build_linear(iset)
        obj.rebase(state.x_k)
        cons = []
        if iset.cvals is not None:
            cons = models.build_linear_many(iset, iset.cvals)
            for cm in cons:
                cm.rebase(state.x_k)

        step = subproblems.cobyla_step(obj, cons, state.delta)
        d = step.step
        dnorm = float(np.linalg.norm(d))

        mhat_red = -float(obj.g @ d)
        if cons:
            viol0 = np.array([-cm.c for cm in cons])
            arows = np.vstack([cm.g for cm in cons])
            v_hat0 = float(np.maximum(viol0, 0.0).max())
            v_hatd = float(np.maximum(viol0 - arows @ d, 0.0).max())
        else:
            v_hat0 = v_hatd = 0.0
        vred = v_hat0 - v_hatd
        pred = mhat_red + mu * vred
        if pred <= 0 and vred > 1e-14 * max(1.0, v_hat0):
            needed = 1.5 * (-mhat_red) / vred + 1e-6
            mu = min(_MU_CAP, max(2.0 * mu, needed))
            pred = mhat_red + mu * vred
            _set_center(iset, mu)
            state.x_k = iset.points[iset.center_index].copy()

        took_step = dnorm >= 0.5 * state.delta and pred > 0 and \
            np.all(np.isfinite(d))
        ratio = -math.inf
        if took_step:
            xtrial = state.x_k + d
            ftrial, ctrial = evaluate(xtrial)
            vtrial = _max_violation(ctrial) if ctrial is not None else 0.0
            merit_old = _merit(f_c, v_c, mu)
            merit_new = _merit(ftrial, vtrial, mu)
            ratio = (merit_old - merit_new) / pred
            if merit_new < merit_old and vtrial > v_c + 1e-12 * max(1.0, v_c):
                mu = min(_MU_CAP, 2.0 * mu if mu > 0 else 1.0)
            _admit_trial(iset, state, xtrial, ftrial, ctrial)
            _set_center(iset, mu)
            state.x_k = iset.points[iset.center_index].copy()
            if ratio >= 0.1:
                continue

        acceptable, worst, dists = _simplex_quality(iset, state.x_k, state.delta)
        if not acceptable:
            if len(record) >= max_evals:
                raise _Finish(Status.MAX_EVALS)
            _geometry_repair(iset, state, evaluate, worst, mu)
            _set_center(iset, mu)
            state.x_k = iset.points[iset.center_index].copy()
            continue
        if state.delta > state.rho:
            state.delta = max(state.rho, 0.5 * state.delta)
            if state.delta <= 1.5 * state.rho:
                state.delta = state.rho
        elif state.rho > state.rho_end:
            old_delta = state.delta
            reduce_rho(state)
            state.delta = min(state.delta, old_delta)
        else:
            raise _Finish(Status.RHO_END_REACHED)
    raise _Finish(Status.MAX_EVALS, "iteration cap reached")


def _admit_trial(iset, state, xtrial, ftrial, ctrial):
    """Replace the point with the best weighted denominator by the trial."""
    lvals = iset.lagrange_values_at(xtrial)
    dists = np.linalg.norm(iset.points - state.x_k, axis=1)
    ref = max(state.delta, state.rho)
    weights = np.abs(lvals) * np.maximum(1.0, dists / ref) ** 3
    weights[iset.center_index] = -np.inf
    scale = max(1.0, float(np.abs(lvals).max(initial=0.0)))
    order = np.argsort(-weights)
    for t in order:
        if t == iset.center_index or abs(lvals[t]) < 1e-12 * scale:
            continue
        try:
            iset.smw_replace(int(t), xtrial, ftrial, cnew=ctrial,
                             dup_tol=1e-14 * max(state.delta, 1e-300))
            return True
        except TinyDenominator:
            continue
    return False


def _geometry_repair(iset, state, evaluate, drop, mu):
    """Move one vertex half a radius along its Lagrange gradient."""
    lag = models.lagrange(iset, drop)
    gl = lag.g
    gn = float(np.linalg.norm(gl))
    if gn <= 1e-300:
        drop = max((j for j in range(iset.npt) if j != iset.center_index),
                   key=lambda j: float(np.linalg.norm(iset.points[j] - state.x_k)))
        lag = models.lagrange(iset, drop)
        gl = lag.g
        gn = max(float(np.linalg.norm(gl)), 1e-300)
    u = gl / gn
    # Sign chosen by the merit models at the two candidates.
    obj = models.build_linear(iset)
    cons = models.build_linear_many(iset, iset.cvals) if iset.cvals is not None else []
    best = None
    best_key = None
    for sgn in (1.0, -1.0):
        x = state.x_k + sgn * 0.5 * state.delta * u
        fh = float(obj.value(x))
        vh = max(0.0, -min((float(cm.value(x)) for cm in cons), default=0.0))
        key = (fh + mu * vh, -sgn)
        if best_key is None or key < best_key:
            best_key = key
            best = x
    fg, cg = evaluate(best)
    try:
        iset.smw_replace(drop, best, fg, cnew=cg,
                         dup_tol=1e-14 * max(state.delta, 1e-300))
    except TinyDenominator:
        iset.refactorize()


def _finalize(problem, record, hist_viol, status, message):
    if len(record) == 0:
        return SolveResult(x=problem.x0.copy(), fun=math.nan, status=status,
                           neval=0, history=record, message=message or
                           "no evaluations performed", solver="cobyla")
    entries = record.entries
    finite = [i for i in range(len(entries)) if math.isfinite(entries[i].raw)]
    pool = finite if finite else list(range(len(entries)))
    feasible = [i for i in pool if hist_viol[i] <= _FEAS_TOL]
    if feasible:
        best = min(feasible, key=lambda i: (entries[i].moderated, i))
    else:
        best = min(pool, key=lambda i: (hist_viol[i], entries[i].moderated, i))
    e = entries[best]
    fun = e.raw if math.isfinite(e.raw) else e.moderated
    return SolveResult(x=e.x.copy(), fun=float(fun), status=status,
                       neval=len(record), history=record,
                       constraint_violation=float(hist_viol[best]),
                       message=message, solver="cobyla")
