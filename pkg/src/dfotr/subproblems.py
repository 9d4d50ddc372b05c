"""Trust-region and geometry subproblem solvers.

All functions are pure: they read their arguments and return fresh step
objects, so concurrent calls are safe.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _convex, _kernels

TCG_TOL = 1e-2
REFINE_ROUNDS = 10
REFINE_CUT = 1e-2


class Recipe(enum.Enum):
    LINE = "line"
    CAUCHY = "cauchy"
    GRADIENT = "gradient"
    PROJECTED_GRADIENT = "projected-gradient"
    TWO_DIM_REFINED = "two-dim-refined"


@dataclass
class TrustRegionStep:
    step: np.ndarray
    predicted_reduction: float
    on_boundary: bool
    active_set: list = field(default_factory=list)


@dataclass
class GeometryStep:
    point: np.ndarray
    lagrange_abs: float
    recipe: Recipe


def _model_reduction(g, H, d):
    """q(0) - q(d) for q(d) = g'd + d'Hd/2."""
    r = -(float(g @ d) + 0.5 * float(d @ (H @ d))) if H is not None else -float(g @ d)
    return r


def _clip_to_ball(d, delta):
    nd = float(np.linalg.norm(d))
    if not np.isfinite(nd):
        return np.zeros_like(d)
    if nd > delta:
        d = d * (delta / nd)
    return d


# ----------------------------------------------------------------------
# Nearly exact solver (secular Newton iteration with Cholesky solves)
# ----------------------------------------------------------------------


def more_sorensen(g, H, delta):
    """Global solution of min g'd + d'Hd/2 over |d| <= delta.

    Newton iteration on the reciprocal secular equation with Cholesky
    factorizations; the hard case is resolved by augmenting the least-squares
    solution along the bottom eigenvector.
    """
    g = np.asarray(g, dtype=float)
    H = np.asarray(H, dtype=float)
    H = 0.5 * (H + H.T)
    n = g.size
    gnorm = float(np.linalg.norm(g))

    d, lam = _ms_solve(g, H, delta, gnorm, n)
    nd = float(np.linalg.norm(d))
    on_boundary = nd >= delta * (1 - 1e-6)
    d = _clip_to_ball(d, delta)
    return TrustRegionStep(step=d, predicted_reduction=max(0.0, _model_reduction(g, H, d)),
                           on_boundary=on_boundary)


def _ms_solve(g, H, delta, gnorm, n):
    # Fast path: positive definite Hessian with an interior Newton point.
    try:
        c, low = scipy.linalg.cho_factor(H, lower=True)
        d0 = scipy.linalg.cho_solve((c, low), -g)
        if np.linalg.norm(d0) <= delta:
            return d0, 0.0
        lam_hard = 0.0
        evals = evecs = None
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        evals, evecs = scipy.linalg.eigh(H)
        lam_hard = max(0.0, -float(evals[0]))
        ghat = evecs.T @ g
        scale = max(1.0, float(np.abs(evals).max()))
        denom = evals + lam_hard
        mask = denom > 1e-12 * scale
        d_ls = np.zeros(n)
        if np.any(mask):
            d_ls = -evecs[:, mask] @ (ghat[mask] / denom[mask])
        norm_ls = float(np.linalg.norm(d_ls))
        ortho = float(np.abs(ghat[~mask]).max()) if np.any(~mask) else 0.0
        if norm_ls < delta and ortho <= 1e-10 * max(1.0, gnorm):
            # Hard case: pad with the bottom eigenvector up to the radius.
            v1 = evecs[:, 0]
            alpha = np.sqrt(max(0.0, delta * delta - norm_ls * norm_ls))
            return d_ls + alpha * v1, lam_hard

    # Boundary solution: safeguarded Newton on lambda > lam_hard.
    lam_lo = lam_hard
    lam_hi = lam_hard + gnorm / delta + 1.0
    lam = max(lam_hard + 1e-3 * (gnorm / delta + 1e-12), lam_hard * (1 + 1e-10) + 1e-300)
    d = np.zeros(n)
    for _ in range(60):
        try:
            c, low = scipy.linalg.cho_factor(H + lam * np.eye(n), lower=True)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            lam_lo = lam
            lam = 0.5 * (lam_lo + lam_hi) if lam_hi > lam_lo else lam * 2 + 1e-12
            continue
        d = scipy.linalg.cho_solve((c, low), -g)
        nd = float(np.linalg.norm(d))
        if abs(nd - delta) <= 1e-10 * delta:
            return d, lam
        if nd > delta:
            lam_lo = lam
        else:
            lam_hi = lam
        w = scipy.linalg.solve_triangular(c, d, lower=low)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            break
        lam_new = lam + (nd / nw) ** 2 * (nd - delta) / delta
        if not (lam_lo < lam_new < lam_hi):
            lam_new = max(np.sqrt(max(lam_lo, 1e-300) * lam_hi),
                          lam_lo + 0.5 * (lam_hi - lam_lo))
        lam = lam_new
    # Rare stall: fall back to the eigendecomposition parametrization.
    if evals is None:
        evals, evecs = scipy.linalg.eigh(H)
    ghat = evecs.T @ g
    lam_hard = max(0.0, -float(evals[0]))

    def shifted_solve(lam_):
        denom = evals + lam_
        denom = np.where(np.abs(denom) > 1e-300, denom, 1e-300)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            out = -(ghat / denom)
        return np.nan_to_num(out, nan=0.0, posinf=1e154, neginf=-1e154)

    lo, hi = lam_hard + 1e-14, lam_hard + gnorm / delta + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(np.linalg.norm(shifted_solve(mid))) > delta:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    d = evecs @ shifted_solve(lam)
    return d, lam


# ----------------------------------------------------------------------
# Truncated conjugate gradients and refinements
# ----------------------------------------------------------------------


def truncated_cg(g, H, delta, tol_rel=TCG_TOL, maxiter=0):
    """Steihaug-Toint truncated CG within the ball of radius delta."""
    g = np.asarray(g, dtype=float)
    H = np.asarray(H, dtype=float)
    d, on_boundary = _kernels.steihaug(g, H, delta, tol_rel, maxiter)
    d = _clip_to_ball(d, delta)
    return TrustRegionStep(step=d, predicted_reduction=max(0.0, _model_reduction(g, H, d)),
                           on_boundary=on_boundary)


def _circle_coeffs(g_loc, H, u, v, delta):
    du = delta * u
    dv = delta * v
    Hu = H @ du
    Hv = H @ dv
    return (float(g_loc @ du), float(g_loc @ dv), 0.5 * float(du @ Hu),
            0.5 * float(dv @ Hv), float(du @ Hv))


def _circle_value(a, b, c1, c2, c3, theta):
    c = np.cos(theta)
    s = np.sin(theta)
    return a * c + b * s + c1 * c * c + c2 * s * s + c3 * c * s


def _circle_newton(a, b, c1, c2, c3, theta, minimize=True, iters=12):
    for _ in range(iters):
        c = np.cos(theta)
        s = np.sin(theta)
        d1 = -a * s + b * c + 2 * (c2 - c1) * s * c + c3 * (c * c - s * s)
        d2 = -a * c - b * s + 2 * (c2 - c1) * (c * c - s * s) - 4 * c3 * s * c
        if (minimize and d2 <= 0) or (not minimize and d2 >= 0) or d2 == 0:
            break
        step = d1 / d2
        theta -= step
        if abs(step) < 1e-14:
            break
    return theta


def two_dim_refine(model, d, x_k, delta, max_rounds=REFINE_ROUNDS):
    """Improve a boundary step by circle searches in span{d, grad}.

    Never increases the model; stops when a round improves the predicted
    reduction by less than one percent.
    """
    x_k = np.asarray(x_k, dtype=float)
    d = np.asarray(d, dtype=float).copy()
    g_loc = model.grad(x_k)
    H = model.hessian()
    q = float(g_loc @ d) + 0.5 * float(d @ (H @ d))
    for _ in range(max_rounds):
        grad_at = g_loc + H @ d
        u = d / delta
        s_perp = grad_at - float(grad_at @ u) * u
        ns = float(np.linalg.norm(s_perp))
        if ns <= 1e-12 * max(1.0, float(np.linalg.norm(grad_at))):
            break
        v = s_perp / ns
        a, b, c1, c2, c3 = _circle_coeffs(g_loc, H, u, v, delta)
        thetas = np.linspace(0.0, 2 * np.pi, 129)[:-1]
        vals = _circle_value(a, b, c1, c2, c3, thetas)
        theta = float(thetas[np.argmin(vals)])
        theta = _circle_newton(a, b, c1, c2, c3, theta, minimize=True)
        q_new = float(_circle_value(a, b, c1, c2, c3, theta))
        if not np.isfinite(q_new) or q_new >= q:
            break
        d_new = delta * (np.cos(theta) * u + np.sin(theta) * v)
        d_new *= delta / float(np.linalg.norm(d_new))
        improvement = q - q_new
        d = d_new
        stop = improvement < REFINE_CUT * max(abs(q_new), 1e-300)
        q = q_new
        if stop:
            break
    return d


# ----------------------------------------------------------------------
# Active-set TCG for bounds (feasible) and linear constraints
# ----------------------------------------------------------------------


def tcg_bounds(g, H, delta, lower, upper, x_k, tol_rel=TCG_TOL, refine=True):
    """Bound-respecting truncated CG; every point satisfies the box exactly."""
    g = np.asarray(g, dtype=float)
    H = np.asarray(H, dtype=float)
    x_k = np.asarray(x_k, dtype=float)
    n = g.size
    lo = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    hi = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)

    scale = np.maximum(1.0, np.abs(x_k))
    at_lo = x_k - lo <= 1e-13 * scale
    at_hi = hi - x_k <= 1e-13 * scale
    active = (at_lo & (g > 0)) | (at_hi & (g < 0))
    d = np.zeros(n)
    on_boundary = False
    total_iters = 0
    max_total = 4 * n + 10

    while total_iters < max_total:
        free = ~active
        if not np.any(free):
            break
        r = g + H @ d
        rf = np.where(free, r, 0.0)
        rr = float(rf @ rf)
        r0 = np.sqrt(rr)
        if r0 <= 1e-15:
            break
        p = -rf
        restart = False
        converged = False
        while total_iters < max_total:
            total_iters += 1
            Hp = H @ p
            curv = float(p @ Hp)
            pp = float(p @ p)
            dp = float(d @ p)
            dd = float(d @ d)
            if pp <= 0:
                converged = True
                break
            # Step length to the trust-region boundary along p.
            disc = dp * dp + pp * (delta * delta - dd)
            tau_tr = (-dp + np.sqrt(max(disc, 0.0))) / pp
            # Step length to the nearest bound among free coordinates.
            tau_bd = np.inf
            hit = -1
            for i in np.where(free)[0]:
                if p[i] > 1e-300:
                    t = (hi[i] - x_k[i] - d[i]) / p[i]
                elif p[i] < -1e-300:
                    t = (lo[i] - x_k[i] - d[i]) / p[i]
                else:
                    continue
                if t < tau_bd:
                    tau_bd = t
                    hit = i
            alpha = rr / curv if curv > 0 else np.inf
            t_step = min(alpha, tau_tr, tau_bd)
            if t_step == tau_bd and hit >= 0 and tau_bd <= min(alpha, tau_tr):
                d = d + tau_bd * p
                d[hit] = (hi[hit] if p[hit] > 0 else lo[hit]) - x_k[hit]
                active[hit] = True
                restart = True
                break
            if curv <= 0 or alpha >= tau_tr:
                d = d + tau_tr * p
                on_boundary = True
                break
            d = d + alpha * p
            r = r + alpha * Hp
            rf = np.where(free, r, 0.0)
            rr_new = float(rf @ rf)
            if np.sqrt(rr_new) <= tol_rel * r0:
                converged = True
                break
            p = -rf + (rr_new / rr) * p
            rr = rr_new
        if restart:
            continue
        if on_boundary and refine:
            d = _refine_boxed(g, H, d, delta, x_k, lo, hi, active)
        break

    d = _exact_box_step(x_k, d, lo, hi)
    d = _clip_to_ball(d, delta)
    d = _exact_box_step(x_k, d, lo, hi)
    return TrustRegionStep(step=d, predicted_reduction=max(0.0, _model_reduction(g, H, d)),
                           on_boundary=on_boundary,
                           active_set=sorted(np.where(active)[0].tolist()))


def _exact_box_step(x_k, d, lo, hi):
    """Adjust d so that x_k + d lands inside [lo, hi] in float arithmetic."""
    d = np.clip(x_k + d, lo, hi) - x_k
    for _ in range(3):
        xt = x_k + d
        over = xt > hi
        under = xt < lo
        if not (np.any(over) or np.any(under)):
            break
        d[over] = np.nextafter(d[over], -np.inf)
        d[under] = np.nextafter(d[under], np.inf)
    return d


def _refine_boxed(g, H, d, delta, x_k, lo, hi, active):
    """Feasible circle search over the free subspace of a boundary step."""
    free = ~active
    if free.sum() < 2:
        return d
    d_act = np.where(active, d, 0.0)
    rad2 = delta * delta - float(d_act @ d_act)
    if rad2 <= 0:
        return d
    rad = np.sqrt(rad2)
    df = np.where(free, d, 0.0)
    ndf = float(np.linalg.norm(df))
    if ndf <= 1e-14:
        return d
    u = df / ndf
    grad_at = g + H @ d
    gf = np.where(free, grad_at, 0.0)
    s_perp = gf - float(gf @ u) * u
    ns = float(np.linalg.norm(s_perp))
    if ns <= 1e-12 * max(1.0, float(np.linalg.norm(gf))):
        return d
    v = s_perp / ns

    def q_of(dd):
        return float(g @ dd) + 0.5 * float(dd @ (H @ dd))

    best = d
    best_q = q_of(d)
    for theta in np.linspace(0.0, 2 * np.pi, 65)[:-1]:
        cand = d_act + rad * (np.cos(theta) * u + np.sin(theta) * v)
        x = x_k + cand
        if np.any(x < lo - 0.0) or np.any(x > hi + 0.0):
            continue
        qc = q_of(cand)
        if qc < best_q:
            best_q = qc
            best = cand
    return best


def tcg_linear(g, H, delta, a_ub, b_ub, x_k, tol_rel=TCG_TOL):
    """Active-set projected TCG for linear inequality constraints.

    Constraints already within a fifth of the radius of the center are
    candidate-active; the working set grows when a step hits a constraint and
    shrinks when its least-squares multiplier turns negative.
    """
    g = np.asarray(g, dtype=float)
    H = np.asarray(H, dtype=float)
    x_k = np.asarray(x_k, dtype=float)
    n = g.size
    if a_ub is None or len(a_ub) == 0:
        return truncated_cg(g, H, delta, tol_rel)
    a_ub = np.atleast_2d(np.asarray(a_ub, dtype=float))
    b_ub = np.atleast_1d(np.asarray(b_ub, dtype=float))
    m = a_ub.shape[0]
    norms = np.maximum(np.linalg.norm(a_ub, axis=1), 1e-300)
    resid = b_ub - a_ub @ x_k

    working = set(np.where(resid <= 1e-10 * np.maximum(1.0, np.abs(b_ub)))[0].tolist())
    # Candidate-active: close by and approached by the descent direction.
    near = resid <= 0.2 * delta * norms
    for i in np.where(near)[0]:
        if float(a_ub[i] @ (-g)) > 0:
            working.add(int(i))

    d = np.zeros(n)
    on_boundary = False
    outer = 0
    while outer < m + n + 2:
        outer += 1
        wlist = sorted(working)
        if wlist:
            q_full, _ = np.linalg.qr(a_ub[wlist].T, mode="complete")
            rank = np.linalg.matrix_rank(a_ub[wlist], tol=1e-12 * norms.max())
            Z = q_full[:, rank:]
        else:
            Z = np.eye(n)
        if Z.shape[1] == 0:
            break
        hit, boundary, conv = _projected_cg(g, H, delta, d, Z, a_ub, b_ub, resid,
                                            working, tol_rel)
        if hit >= 0:
            working.add(hit)
            continue
        if boundary:
            on_boundary = True
            break
        # Converged in the current subspace: check multipliers for drops.
        if not wlist:
            break
        grad_at = g + H @ d
        lam, *_ = np.linalg.lstsq(a_ub[wlist].T, -grad_at, rcond=None)
        if np.all(lam >= -1e-10 * max(1.0, float(np.abs(grad_at).max()))):
            break
        worst = wlist[int(np.argmin(lam))]
        initial = resid[worst] <= 1e-10 * max(1.0, abs(b_ub[worst]))
        if initial:
            break
        working.discard(worst)

    # Guard against real crossings; violations at the 1e-10 contract level
    # are left alone.
    tol = 1e-10 * max(1.0, float(np.abs(b_ub).max()))
    viol = a_ub @ d - resid
    bad = viol > tol
    if np.any(bad):
        with np.errstate(divide="ignore", invalid="ignore"):
            shrink = np.min(np.where(bad, resid / np.maximum(a_ub @ d, 1e-300), np.inf))
        if 0 <= shrink < 1:
            d = d * shrink
    d = _clip_to_ball(d, delta)
    return TrustRegionStep(step=d, predicted_reduction=max(0.0, _model_reduction(g, H, d)),
                           on_boundary=on_boundary, active_set=sorted(working))


def _projected_cg(g, H, delta, d, Z, a_ub, b_ub, resid, working, tol_rel):
    """CG restricted to range(Z), mutating d in place.

    Returns (hit_index, boundary, converged); hit_index >= 0 means d stopped
    exactly on a new constraint that should join the working set.
    """
    n = g.size
    proj = lambda vec: Z @ (Z.T @ vec)
    r = proj(g + H @ d)
    rr = float(r @ r)
    r0 = np.sqrt(rr)
    if r0 <= 1e-15:
        return -1, False, True
    p = -r
    others = [i for i in range(a_ub.shape[0]) if i not in working]
    for _ in range(2 * n + 5):
        Hp = H @ p
        curv = float(p @ Hp)
        pp = float(p @ p)
        if pp <= 1e-300:
            return -1, False, True
        dp = float(d @ p)
        dd = float(d @ d)
        disc = dp * dp + pp * (delta * delta - dd)
        tau_tr = (-dp + np.sqrt(max(disc, 0.0))) / pp
        tau_con = np.inf
        hit = -1
        for i in others:
            ap = float(a_ub[i] @ p)
            if ap > 1e-300:
                t = (resid[i] - float(a_ub[i] @ d)) / ap
                if t < tau_con:
                    tau_con = t
                    hit = i
        alpha = rr / curv if curv > 0 else np.inf
        t_step = min(alpha, tau_tr, tau_con)
        if t_step == tau_con and hit >= 0 and tau_con <= min(alpha, tau_tr):
            d += tau_con * p
            return hit, False, False
        if curv <= 0 or alpha >= tau_tr:
            d += tau_tr * p
            return -1, True, False
        d += alpha * p
        r = proj(g + H @ d)
        rr_new = float(r @ r)
        if np.sqrt(rr_new) <= tol_rel * r0:
            return -1, False, True
        p = -r + (rr_new / rr) * p
        rr = rr_new
    return -1, False, True


# ----------------------------------------------------------------------
# Two-stage linearized step (nonlinear-constraint driver)
# ----------------------------------------------------------------------


def cobyla_step(obj_model, con_models, delta):
    """Two-stage step on linear models within the ball of radius delta.

    Stage one minimizes the largest violation of the linearized constraints;
    stage two, when stage one leaves room inside the ball, reduces the
    linearized objective without increasing any greatest violation.
    """
    gobj = obj_model.g
    n = gobj.size
    if not con_models:
        gn = float(np.linalg.norm(gobj))
        d = np.zeros(n) if gn == 0 else -delta / gn * gobj
        return TrustRegionStep(step=d, predicted_reduction=max(0.0, -float(gobj @ d)),
                               on_boundary=gn > 0)

    a_rows = np.vstack([cm.g for cm in con_models])
    c0 = np.array([cm.c for cm in con_models])
    viol0 = -c0  # feasibility of row i reads a_i'd >= viol0_i

    d1, vstar, interior = _convex.minimax_ball(viol0, a_rows, delta)
    d = d1
    if interior:
        margin = 1e-12 * max(1.0, abs(vstar), float(np.abs(viol0).max()))
        rhs = -(viol0 - vstar - margin)
        d2 = _convex.ball_lp(gobj, -a_rows, rhs, delta)
        if d2 is not None:
            v2 = float(np.maximum(viol0 - a_rows @ d2, 0.0).max())
            if v2 <= vstar + 10 * margin + 1e-9 * max(1.0, vstar):
                d = d2

    v_at = lambda dd: float(np.maximum(viol0 - a_rows @ dd, 0.0).max()) if len(c0) else 0.0
    pred = (v_at(np.zeros(n)) - v_at(d)) + max(0.0, -float(gobj @ d))
    nd = float(np.linalg.norm(d))
    act = np.where(viol0 - a_rows @ d >= v_at(d) - 1e-10 * max(1.0, v_at(d)))[0]
    d = _clip_to_ball(d, delta)
    return TrustRegionStep(step=d, predicted_reduction=max(0.0, pred),
                           on_boundary=nd >= delta * (1 - 1e-8),
                           active_set=act.tolist())


# ----------------------------------------------------------------------
# Geometry steps: approximately maximize |lagrange| within a ball
# ----------------------------------------------------------------------


def _absmax_on_interval(v0, slope, curv, lo, hi):
    cands = [lo, hi]
    if abs(curv) > 1e-300:
        sv = -slope / curv
        if lo < sv < hi:
            cands.append(sv)
    best_s = lo
    best_v = -np.inf
    for s in cands:
        val = abs(v0 + slope * s + 0.5 * curv * s * s)
        if val > best_v:
            best_v = val
            best_s = s
    return best_s, best_v


def _line_absmax(lagr, x_k, direction, smin, smax):
    """Maximize |l(x_k + s u)| over s in [smin, smax]; O(n^2)."""
    v0, grad = lagr.value_grad(x_k)
    slope = float(grad @ direction)
    curv = float(direction @ (lagr.hessian() @ direction))
    return _absmax_on_interval(v0, slope, curv, smin, smax)


def _circle_polish_abs(lagr, x_k, point, deltabar, rounds=3):
    """Circle searches enlarging |l| on the sphere of radius deltabar."""
    l0 = lagr.value(x_k)
    g_loc = lagr.grad(x_k)
    H = lagr.hessian()
    d = point - x_k
    best_val = abs(lagr.value(point))
    for _ in range(rounds):
        nd = float(np.linalg.norm(d))
        if nd <= 1e-14:
            break
        u = d / nd
        grad_at = g_loc + H @ d
        s_perp = grad_at - float(grad_at @ u) * u
        ns = float(np.linalg.norm(s_perp))
        if ns <= 1e-12 * max(1.0, float(np.linalg.norm(grad_at))):
            break
        v = s_perp / ns
        a, b, c1, c2, c3 = _circle_coeffs(g_loc, H, u, v, deltabar)
        thetas = np.linspace(0.0, 2 * np.pi, 129)[:-1]
        vals = l0 + _circle_value(a, b, c1, c2, c3, thetas)
        idx_max = int(np.argmax(vals))
        idx_min = int(np.argmin(vals))
        th_max = _circle_newton(a, b, c1, c2, c3, float(thetas[idx_max]), minimize=False)
        th_min = _circle_newton(a, b, c1, c2, c3, float(thetas[idx_min]), minimize=True)
        v_max = l0 + _circle_value(a, b, c1, c2, c3, th_max)
        v_min = l0 + _circle_value(a, b, c1, c2, c3, th_min)
        theta = th_max if abs(v_max) >= abs(v_min) else th_min
        val = max(abs(v_max), abs(v_min))
        if not np.isfinite(val) or val <= best_val * (1 + 1e-12):
            break
        d_new = deltabar * (np.cos(theta) * u + np.sin(theta) * v)
        d_new *= deltabar / float(np.linalg.norm(d_new))
        d = d_new
        best_val = val
    return x_k + d


def geo_uobyqa(lagr, x_k, deltabar):
    """Inexact |lagrange| maximization over the ball, O(n^2) work.

    Probes the gradient direction, the dominant-curvature column, and every
    coordinate axis, then polishes the winner with a circle search.
    """
    x_k = np.asarray(x_k, dtype=float)
    n = x_k.size
    H = lagr.hessian()
    l0, grad = lagr.value_grad(x_k)
    diag = np.diag(H)

    best_point = None
    best_val = -np.inf
    best_recipe = Recipe.GRADIENT

    gn = float(np.linalg.norm(grad))
    if gn > 0:
        u = grad / gn
        s, val = _line_absmax(lagr, x_k, u, -deltabar, deltabar)
        if val > best_val:
            best_val, best_point, best_recipe = val, x_k + s * u, Recipe.GRADIENT
    col_norms = np.linalg.norm(H, axis=0)
    j = int(np.argmax(col_norms)) if n else 0
    if n and col_norms[j] > 0:
        u = H[:, j] / col_norms[j]
        s, val = _line_absmax(lagr, x_k, u, -deltabar, deltabar)
        if val > best_val:
            best_val, best_point, best_recipe = val, x_k + s * u, Recipe.CAUCHY
    # Coordinate axes cost O(1) each given the gradient and diagonal.
    for i in range(n):
        s, val = _absmax_on_interval(l0, float(grad[i]), float(diag[i]),
                                     -deltabar, deltabar)
        if val > best_val:
            p = x_k.copy()
            p[i] += s
            best_val, best_point, best_recipe = val, p, Recipe.LINE
    if best_point is None:
        best_point = x_k.copy()
        best_point[0] += deltabar
        best_recipe = Recipe.LINE

    polished = _circle_polish_abs(lagr, x_k, best_point, deltabar)
    if abs(lagr.value(polished)) > abs(lagr.value(best_point)):
        best_point = polished
        best_recipe = Recipe.TWO_DIM_REFINED
    return GeometryStep(point=best_point, lagrange_abs=abs(float(lagr.value(best_point))),
                        recipe=best_recipe)


def geo_newuoa(lagr, iset, drop, x_k, deltabar):
    """Line through the dropped point, then two-dimensional refinement."""
    x_k = np.asarray(x_k, dtype=float)
    yd = iset.points[drop]
    u = yd - x_k
    nu = float(np.linalg.norm(u))
    if nu <= 1e-300:
        return geo_uobyqa(lagr, x_k, deltabar)
    u = u / nu
    vplus = lagr.value(x_k + deltabar * u)
    vminus = lagr.value(x_k - deltabar * u)
    sgn = 1.0 if abs(vplus) >= abs(vminus) else -1.0
    line_point = x_k + sgn * deltabar * u
    line_val = abs(vplus) if sgn > 0 else abs(vminus)

    refined = _circle_polish_abs(lagr, x_k, line_point, deltabar, rounds=REFINE_ROUNDS)
    ref_val = abs(float(lagr.value(refined)))
    if ref_val > line_val:
        return GeometryStep(point=refined, lagrange_abs=ref_val,
                            recipe=Recipe.TWO_DIM_REFINED)
    return GeometryStep(point=line_point, lagrange_abs=abs(float(lagr.value(line_point))),
                        recipe=Recipe.LINE)


def _line_candidates_through_points(lagr, iset, x_k, deltabar, lower=None, upper=None):
    """Best |l| on lines through the center and every other point."""
    n = x_k.size
    best_point = None
    best_val = -np.inf
    for j in range(iset.npt):
        u = iset.points[j] - x_k
        nu = float(np.linalg.norm(u))
        if nu <= 1e-300:
            continue
        u = u / nu
        smin, smax = -deltabar, deltabar
        if lower is not None or upper is not None:
            lo = -np.inf if lower is None else lower
            hi = np.inf if upper is None else upper
            for i in range(n):
                if u[i] > 1e-300:
                    smax = min(smax, (hi[i] - x_k[i]) / u[i])
                    smin = max(smin, (lo[i] - x_k[i]) / u[i])
                elif u[i] < -1e-300:
                    smax = min(smax, (lo[i] - x_k[i]) / u[i])
                    smin = max(smin, (hi[i] - x_k[i]) / u[i])
        if smin > smax:
            continue
        s, val = _line_absmax(lagr, x_k, u, smin, smax)
        if val > best_val:
            best_val = val
            best_point = x_k + s * u
    return best_point, best_val


def geo_bobyqa(lagr, iset, drop, x_k, deltabar, lower, upper):
    """Better of the through-points line search and a bounded Cauchy step."""
    x_k = np.asarray(x_k, dtype=float)
    lo = np.full(x_k.size, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    hi = np.full(x_k.size, np.inf) if upper is None else np.asarray(upper, dtype=float)

    cand_a, val_a = _line_candidates_through_points(lagr, iset, x_k, deltabar, lo, hi)
    cand_b, val_b = _bounded_cauchy_absmax(lagr, x_k, deltabar, lo, hi)

    if cand_a is None or (cand_b is not None and val_b > val_a):
        point, recipe = cand_b, Recipe.CAUCHY
    else:
        point, recipe = cand_a, Recipe.LINE
    if point is None:
        point = x_k.copy()
    point = np.clip(point, lo, hi)
    return GeometryStep(point=point, lagrange_abs=abs(float(lagr.value(point))),
                        recipe=recipe)


def _bounded_cauchy_absmax(lagr, x_k, deltabar, lo, hi):
    """Piecewise-exact |l| maximization along the clipped gradient path."""
    grad = lagr.grad(x_k)
    gn = float(np.linalg.norm(grad))
    if gn <= 1e-300:
        return None, -np.inf
    best_point = None
    best_val = -np.inf
    for sgn in (1.0, -1.0):
        p = sgn * grad / gn
        t = 0.0
        x = x_k.copy()
        moving = np.abs(p) > 0
        guard = 0
        while guard < 2 * x_k.size + 2:
            guard += 1
            w = np.where(moving, p, 0.0)
            nw = float(np.linalg.norm(w))
            if nw <= 1e-300:
                break
            # Segment end: next bound breakpoint or the ball crossing.
            t_break = np.inf
            idx = -1
            for i in np.where(moving)[0]:
                if w[i] > 0:
                    tb = (hi[i] - x[i]) / w[i]
                elif w[i] < 0:
                    tb = (lo[i] - x[i]) / w[i]
                else:
                    continue
                if tb < t_break:
                    t_break = tb
                    idx = i
            diff = x - x_k
            aa = nw * nw
            bb = 2 * float(diff @ w)
            cc = float(diff @ diff) - deltabar * deltabar
            disc = bb * bb - 4 * aa * cc
            t_ball = (-bb + np.sqrt(max(disc, 0.0))) / (2 * aa) if disc >= 0 else 0.0
            t_end = min(t_break, t_ball)
            if t_end <= 0:
                break
            s, val = _line_absmax(lagr, x, w / nw, 0.0, t_end * nw)
            if val > best_val:
                best_val = val
                best_point = x + (s / nw) * w
            if t_break < t_ball and idx >= 0:
                x = x + t_break * w
                x[idx] = hi[idx] if w[idx] > 0 else lo[idx]
                moving[idx] = False
                continue
            break
    if best_point is not None:
        best_point = np.clip(best_point, lo, hi)
    return best_point, best_val


def geo_lincoa(lagr, iset, drop, x_k, deltabar, a_ub, b_ub,
               near_factor=1e-2, keep_factor=0.1):
    """Pick among line, gradient, and projected-gradient candidates."""
    x_k = np.asarray(x_k, dtype=float)
    cand1, val1 = _line_candidates_through_points(lagr, iset, x_k, deltabar)
    grad = lagr.grad(x_k)
    gn = float(np.linalg.norm(grad))
    cand2, val2 = None, -np.inf
    if gn > 0:
        u = grad / gn
        s, val2 = _line_absmax(lagr, x_k, u, -deltabar, deltabar)
        cand2 = x_k + s * u

    if cand1 is None or (cand2 is not None and val2 > val1):
        incumbent, inc_val, recipe = cand2, val2, Recipe.GRADIENT
    else:
        incumbent, inc_val, recipe = cand1, val1, Recipe.LINE
    if incumbent is None:
        incumbent = x_k.copy()
        inc_val = abs(float(lagr.value(incumbent)))
        recipe = Recipe.LINE

    if a_ub is not None and len(a_ub) > 0 and gn > 0:
        a_ub = np.atleast_2d(np.asarray(a_ub, dtype=float))
        b_ub = np.atleast_1d(np.asarray(b_ub, dtype=float))
        norms = np.maximum(np.linalg.norm(a_ub, axis=1), 1e-300)
        resid = b_ub - a_ub @ x_k
        act = np.where(resid <= 0.2 * deltabar * norms)[0]
        if act.size:
            q_full, _ = np.linalg.qr(a_ub[act].T, mode="complete")
            rank = np.linalg.matrix_rank(a_ub[act], tol=1e-12 * norms.max())
            Z = q_full[:, rank:]
            if Z.shape[1] > 0:
                pg = Z @ (Z.T @ grad)
                npg = float(np.linalg.norm(pg))
                if npg > 1e-12 * gn:
                    u = pg / npg
                    s, val3 = _line_absmax(lagr, x_k, u, -deltabar, deltabar)
                    cand3 = x_k + s * u
                    viol = a_ub @ cand3 - b_ub
                    near = np.all(viol <= near_factor * deltabar * norms)
                    if near and val3 >= keep_factor * inc_val:
                        return GeometryStep(point=cand3,
                                            lagrange_abs=abs(float(lagr.value(cand3))),
                                            recipe=Recipe.PROJECTED_GRADIENT)
    return GeometryStep(point=incumbent, lagrange_abs=abs(float(lagr.value(incumbent))),
                        recipe=recipe)
