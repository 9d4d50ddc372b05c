"""Pure NumPy implementations of the hot kernels.

Semantically identical to the compiled versions in ``_native.pyx``; selected
automatically when the extension is unavailable or when DFOTR_PURE_PYTHON=1.
"""

import numpy as np

BACKEND = "pure"


def quad_value_grad(c, g, H, d):
    """Value and gradient of c + g'd + d'Hd/2 at displacement d.

    H may be None for linear models, in which case the gradient is constant.
    """
    if H is None:
        return c + float(g @ d), g.copy()
    Hd = H @ d
    value = c + float(g @ d) + 0.5 * float(d @ Hd)
    return value, g + Hd


def steihaug(g, H, delta, tol_rel=1e-2, maxiter=0):
    """Steihaug-Toint truncated conjugate gradients on min g'd + d'Hd/2, |d| <= delta.

    Returns (d, on_boundary). Exits to the boundary on negative curvature or
    when an iterate would leave the ball; otherwise stops when the residual
    drops below tol_rel times the initial gradient norm.
    """
    n = g.shape[0]
    if maxiter <= 0:
        maxiter = n
    d = np.zeros(n)
    gnorm0 = float(np.linalg.norm(g))
    if gnorm0 == 0.0 or not np.isfinite(gnorm0):
        return d, False
    r = g.copy()
    p = -g
    rr = gnorm0 * gnorm0
    for _ in range(maxiter):
        Hp = H @ p
        curv = float(p @ Hp)
        pp = float(p @ p)
        dp = float(d @ p)
        dd = float(d @ d)
        if curv <= 0.0 or curv <= 1e-15 * pp:
            tau = _boundary_tau(dd, dp, pp, delta)
            d = d + tau * p
            return d, True
        alpha = rr / curv
        dd_next = dd + 2.0 * alpha * dp + alpha * alpha * pp
        if dd_next >= delta * delta:
            tau = _boundary_tau(dd, dp, pp, delta)
            d = d + tau * p
            return d, True
        d = d + alpha * p
        r = r + alpha * Hp
        rr_next = float(r @ r)
        if np.sqrt(rr_next) <= tol_rel * gnorm0:
            return d, False
        p = -r + (rr_next / rr) * p
        rr = rr_next
    return d, False


def _boundary_tau(dd, dp, pp, delta):
    # Positive root of |d + tau p| = delta.
    disc = dp * dp + pp * (delta * delta - dd)
    if disc < 0.0:
        disc = 0.0
    if pp <= 0.0:
        return 0.0
    return (-dp + np.sqrt(disc)) / pp
