"""Dense convex subproblem solves backed by cvxopt's cone programming.

Used for the starting-point projection and for the two-stage linearized
trust-region step of the nonlinear-constraint driver. All calls are
deterministic; cvxopt options are configured once at import and never
mutated afterwards, so concurrent solves are safe.
"""

import numpy as np
from cvxopt import matrix, solvers

# Per-call option ladder: start tight, relax if the interior-point method
# stalls. Options are passed per call, never through the global dict, so
# concurrent solves cannot interfere.
_OPTION_LADDER = (
    {"show_progress": False, "maxiters": 200, "abstol": 1e-9,
     "reltol": 1e-9, "feastol": 1e-9},
    {"show_progress": False, "maxiters": 200, "abstol": 1e-8,
     "reltol": 1e-8, "feastol": 1e-8},
    {"show_progress": False, "maxiters": 100},
)


def _as_matrix(a):
    return matrix(np.asarray(a, dtype=float))


def _conelp(c, G, h, dims):
    """conelp through the option ladder; returns None when all attempts fail."""
    for options in _OPTION_LADDER:
        try:
            sol = solvers.conelp(c, G, h, dims, options=options)
        except (ValueError, ZeroDivisionError, ArithmeticError):
            continue
        if sol["x"] is not None and sol["status"] in ("optimal", "unknown"):
            return sol
    return None


def _qp(P, q, G, h, A, b):
    for options in _OPTION_LADDER:
        try:
            sol = solvers.qp(P, q, G, h, A, b, options=options)
        except (ValueError, ZeroDivisionError, ArithmeticError):
            continue
        if sol["status"] == "primal infeasible":
            return sol
        if sol["x"] is not None:
            return sol
    return None


def projection_qp(x0, lower=None, upper=None, a_ineq=None, b_ineq=None,
                  a_eq=None, b_eq=None):
    """Minimize |x - x0|^2 subject to bounds and linear constraints.

    Returns (x, feasible). When the constraints are detected infeasible,
    returns (None, False). Bounds-only problems are clipped directly.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    no_lin = (a_ineq is None or len(a_ineq) == 0) and (a_eq is None or len(a_eq) == 0)
    if no_lin:
        lo = -np.inf if lower is None else np.asarray(lower, dtype=float)
        hi = np.inf if upper is None else np.asarray(upper, dtype=float)
        if np.any(np.maximum(lo, -np.inf) > np.minimum(hi, np.inf)):
            return None, False
        return np.clip(x0, lo, hi), True

    g_rows = []
    h_vals = []
    if lower is not None:
        lower = np.asarray(lower, dtype=float)
        for i in range(n):
            if np.isfinite(lower[i]):
                row = np.zeros(n)
                row[i] = -1.0
                g_rows.append(row)
                h_vals.append(-lower[i])
    if upper is not None:
        upper = np.asarray(upper, dtype=float)
        for i in range(n):
            if np.isfinite(upper[i]):
                row = np.zeros(n)
                row[i] = 1.0
                g_rows.append(row)
                h_vals.append(upper[i])
    if a_ineq is not None and len(a_ineq) > 0:
        a_ineq = np.atleast_2d(np.asarray(a_ineq, dtype=float))
        b_ineq = np.atleast_1d(np.asarray(b_ineq, dtype=float))
        for i in range(a_ineq.shape[0]):
            g_rows.append(a_ineq[i])
            h_vals.append(b_ineq[i])

    P = matrix(np.eye(n))
    q = _as_matrix(-x0)
    G = _as_matrix(np.vstack(g_rows)) if g_rows else None
    h = _as_matrix(np.array(h_vals)) if g_rows else None

    A = b = None
    if a_eq is not None and len(a_eq) > 0:
        a_eq = np.atleast_2d(np.asarray(a_eq, dtype=float))
        b_eq = np.atleast_1d(np.asarray(b_eq, dtype=float))
        # cvxopt requires full-row-rank equalities; reduce via pivoted QR.
        a_eq, b_eq, consistent = _rank_reduce(a_eq, b_eq)
        if not consistent:
            return None, False
        if a_eq.shape[0] > 0:
            A = _as_matrix(a_eq)
            b = _as_matrix(b_eq)

    sol = _qp(P, q, G, h, A, b)
    if sol is None or sol["status"] == "primal infeasible" or sol["x"] is None:
        return None, False
    x = np.asarray(sol["x"]).ravel()
    if sol["status"] != "optimal" and not _qp_residual_ok(x, x0, lower, upper,
                                                          a_ineq, b_ineq, a_eq, b_eq):
        return None, False
    return x, True


def _rank_reduce(a_eq, b_eq):
    """Drop linearly dependent equality rows; detect inconsistency."""
    m, n = a_eq.shape
    aug = np.hstack([a_eq, b_eq[:, None]])
    scale = max(1.0, float(np.abs(aug).max()))
    import scipy.linalg

    q, r, piv = scipy.linalg.qr(a_eq.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r)) if r.size else np.array([])
    rank = int(np.sum(diag > 1e-12 * max(1.0, diag[0] if diag.size else 0.0)))
    keep = piv[:rank]
    a_red = a_eq[keep]
    b_red = b_eq[keep]
    # Consistency: residual of least-squares solve against the full system.
    sol, *_ = np.linalg.lstsq(a_red, b_red, rcond=None) if rank else (np.zeros(n),)
    resid = np.abs(a_eq @ sol - b_eq).max() if m else 0.0
    return a_red, b_red, resid <= 1e-9 * scale


def _qp_residual_ok(x, x0, lower, upper, a_ineq, b_ineq, a_eq, b_eq, tol=1e-7):
    if lower is not None and np.any(x < np.asarray(lower) - tol):
        return False
    if upper is not None and np.any(x > np.asarray(upper) + tol):
        return False
    if a_ineq is not None and len(a_ineq) > 0:
        if np.any(a_ineq @ x - b_ineq > tol * max(1.0, np.abs(b_ineq).max())):
            return False
    if a_eq is not None and len(a_eq) > 0:
        if np.abs(a_eq @ x - b_eq).max() > tol * max(1.0, np.abs(b_eq).max()):
            return False
    return True


def ball_lp(gobj, a_ub, b_ub, delta):
    """min g'd subject to a_ub d <= b_ub and |d| <= delta.

    The feasible set must be nonempty. Returns the minimizer, with active
    linear constraints polished to machine precision when identifiable.
    """
    gobj = np.asarray(gobj, dtype=float)
    n = gobj.size
    m = 0 if a_ub is None else len(a_ub)
    if m == 0:
        gn = np.linalg.norm(gobj)
        if gn == 0.0:
            return np.zeros(n)
        return -delta / gn * gobj

    a_ub = np.atleast_2d(np.asarray(a_ub, dtype=float))
    b_ub = np.atleast_1d(np.asarray(b_ub, dtype=float))
    c = _as_matrix(gobj)
    G_l = a_ub
    h_l = b_ub
    G_q = np.vstack([np.zeros((1, n)), -np.eye(n)])
    h_q = np.concatenate([[delta], np.zeros(n)])
    G = _as_matrix(np.vstack([G_l, G_q]))
    h = _as_matrix(np.concatenate([h_l, h_q]))
    dims = {"l": m, "q": [n + 1], "s": []}
    sol = _conelp(c, G, h, dims)
    if sol is None:
        return None
    d = np.asarray(sol["x"]).ravel()
    return _polish_ball_lp(gobj, a_ub, b_ub, delta, d)


def _polish_ball_lp(gobj, a_ub, b_ub, delta, d):
    """Newton polish of a ball-constrained LP solution on its active set."""
    scale = max(1.0, float(np.abs(b_ub).max()) if b_ub.size else 1.0)
    act = np.where(b_ub - a_ub @ d <= 1e-6 * scale + 1e-6 * np.abs(b_ub))[0]
    if act.size == 0:
        gn = np.linalg.norm(gobj)
        if gn > 0 and abs(np.linalg.norm(d) - delta) <= 1e-5 * delta:
            cand = -delta / gn * gobj
            if _feasible_ball_lp(cand, a_ub, b_ub, delta, scale):
                return cand
        return d
    a_act = a_ub[act]
    b_act = b_ub[act]
    d_p, *_ = np.linalg.lstsq(a_act, b_act, rcond=None)
    if np.linalg.norm(d_p) > delta * (1 + 1e-9):
        return d
    if abs(np.linalg.norm(d) - delta) <= 1e-5 * delta:
        # Ball active: move along the projected negative gradient.
        q_full, _ = np.linalg.qr(a_act.T, mode="complete")
        rank = min(a_act.shape[0], gobj.size)
        z = q_full[:, rank:] if rank < q_full.shape[1] else None
        if z is None or z.shape[1] == 0:
            cand = d_p
        else:
            gz = z.T @ gobj
            gn = np.linalg.norm(gz)
            room = delta * delta - float(d_p @ d_p)
            if gn <= 1e-14 or room <= 0:
                cand = d_p
            else:
                cand = d_p - np.sqrt(room) / gn * (z @ gz)
    else:
        # Vertex case: need n active rows to pin d down.
        if a_act.shape[0] < gobj.size:
            return d
        cand = d_p
    if _feasible_ball_lp(cand, a_ub, b_ub, delta, scale) and gobj @ cand <= gobj @ d + 1e-9 * max(1.0, abs(gobj @ d)):
        return cand
    return d


def _feasible_ball_lp(d, a_ub, b_ub, delta, scale):
    if np.linalg.norm(d) > delta * (1 + 1e-9):
        return False
    return np.all(a_ub @ d <= b_ub + 1e-8 * scale)


def minimax_ball(viol0, a_rows, delta):
    """Minimize max_i (viol0_i - a_i'd)_+ over |d| <= delta.

    viol0_i is the violation of linearized constraint i at d = 0 (so the
    constraint reads a_i'd >= viol0_i for feasibility). Returns
    (d, vstar, interior) where interior indicates the minimax optimum is
    attained strictly inside the ball.
    """
    a_rows = np.atleast_2d(np.asarray(a_rows, dtype=float))
    viol0 = np.atleast_1d(np.asarray(viol0, dtype=float))
    m, n = a_rows.shape
    if m == 0:
        return np.zeros(n), 0.0, True
    # Variables (d, t): min t s.t. viol0_i - a_i'd <= t, t >= 0, |d| <= delta.
    c = _as_matrix(np.concatenate([np.zeros(n), [1.0]]))
    G_l = np.hstack([-a_rows, -np.ones((m, 1))])
    h_l = -viol0
    G_l = np.vstack([G_l, np.concatenate([np.zeros(n), [-1.0]])])
    h_l = np.concatenate([h_l, [0.0]])
    G_q = np.hstack([np.vstack([np.zeros((1, n)), -np.eye(n)]),
                     np.zeros((n + 1, 1))])
    h_q = np.concatenate([[delta], np.zeros(n)])
    G = _as_matrix(np.vstack([G_l, G_q]))
    h = _as_matrix(np.concatenate([h_l, h_q]))
    dims = {"l": m + 1, "q": [n + 1], "s": []}
    sol = _conelp(c, G, h, dims)
    if sol is None:
        return np.zeros(n), float(np.maximum(viol0, 0.0).max()), False
    z = np.asarray(sol["x"]).ravel()
    d = z[:n]
    nd = np.linalg.norm(d)
    if nd > delta:
        d = d * (delta / nd)
        nd = delta
    vstar = float(np.maximum(viol0 - a_rows @ d, 0.0).max())
    interior = nd < delta * (1.0 - 1e-8)
    return d, vstar, interior
