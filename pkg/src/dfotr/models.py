"""Interpolation sets and surrogate models.

Three variants are maintained:

* ``LINEAR_FULL``: n+1 points, linear model through every point.
* ``QUADRATIC_FULL``: (n+1)(n+2)/2 points, fully determined quadratic.
* ``QUADRATIC_KKT``: n+2..(n+1)(n+2)/2 points; the quadratic minimizing the
  Frobenius norm of the Hessian change subject to interpolation (symmetric
  Broyden update), solved through the inverse of the KKT coefficient matrix.

Each variant keeps the dense inverse of its coefficient matrix up to date
across single-point replacements with rank-1 (full variants) or rank-2 (KKT)
updates, tracking the update denominator whose magnitude certifies safety.
A cheap drift monitor refactorizes from scratch when the maintained inverse
degrades, trading strict fidelity for robustness.
"""

from __future__ import annotations

import enum

import numpy as np

from . import _kernels
from .exceptions import BadNpt, DegenerateSet, SingularKKT, TinyDenominator

TINY_DEN_FACTOR = 1e-12
DUP_TOL_FACTOR = 1e-14
DRIFT_LIMIT = 1e-7
RISKY_DEN_FACTOR = 1e-3
COND_LIMIT = 1e14


class Variant(enum.Enum):
    LINEAR_FULL = "linear"
    QUADRATIC_FULL = "quadratic-full"
    QUADRATIC_KKT = "quadratic-kkt"


class ModelKind(enum.Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"


def npt_full(n):
    return (n + 1) * (n + 2) // 2


def legal_npt(variant, n, npt):
    if variant is Variant.LINEAR_FULL:
        return npt == n + 1
    if variant is Variant.QUADRATIC_FULL:
        return npt == npt_full(n)
    return n + 2 <= npt <= npt_full(n)


class SurrogateModel:
    """Quadratic (or linear) model c + g'(x-base) + (x-base)'H(x-base)/2."""

    def __init__(self, kind, c, g, H, base):
        self.kind = kind
        self.c = float(c)
        self.g = np.asarray(g, dtype=float).copy()
        if kind is ModelKind.LINEAR:
            self.H = None
        else:
            H = np.asarray(H, dtype=float)
            self.H = 0.5 * (H + H.T)
        self.base = np.asarray(base, dtype=float).copy()

    @property
    def n(self):
        return self.g.size

    def hessian(self):
        if self.H is None:
            return np.zeros((self.n, self.n))
        return self.H

    def value(self, x):
        v, _ = _kernels.quad_value_grad(self.c, self.g, self.H, np.asarray(x) - self.base)
        return v

    def grad(self, x):
        _, gr = _kernels.quad_value_grad(self.c, self.g, self.H, np.asarray(x) - self.base)
        return gr

    def value_grad(self, x):
        return _kernels.quad_value_grad(self.c, self.g, self.H, np.asarray(x) - self.base)

    def value_many(self, points):
        d = np.atleast_2d(points) - self.base
        vals = self.c + d @ self.g
        if self.H is not None:
            vals = vals + 0.5 * np.einsum("ij,jk,ik->i", d, self.H, d)
        return vals

    def rebase(self, new_base):
        """Re-express about new_base; pointwise values are unchanged."""
        new_base = np.asarray(new_base, dtype=float)
        s = new_base - self.base
        c_new, g_new = _kernels.quad_value_grad(self.c, self.g, self.H, s)
        self.c = c_new
        self.g = g_new
        self.base = new_base.copy()

    def copy(self):
        return SurrogateModel(self.kind, self.c, self.g,
                              None if self.H is None else self.H.copy(), self.base)

    def is_finite(self):
        ok = np.isfinite(self.c) and np.all(np.isfinite(self.g))
        if ok and self.H is not None:
            ok = bool(np.all(np.isfinite(self.H)))
        return bool(ok)


class LagrangeFunction(SurrogateModel):
    """Model-space polynomial with value 1 at its owner point, 0 elsewhere."""

    def __init__(self, kind, c, g, H, base, owner_index):
        super().__init__(kind, c, g, H, base)
        self.owner_index = int(owner_index)


class InverseSystem:
    """Dense inverse of the interpolation (or KKT) coefficient matrix."""

    def __init__(self, variant, matrix):
        self.variant = variant
        self.matrix = matrix
        self.last_denominator = 1.0


def _phi_full(d):
    """Monomial basis row [1, d, d_i^2/2, d_i d_j (i<j)] for a displacement."""
    n = d.size
    out = np.empty(npt_full(n))
    out[0] = 1.0
    out[1:n + 1] = d
    out[n + 1:2 * n + 1] = 0.5 * d * d
    k = 2 * n + 1
    for i in range(n):
        for j in range(i + 1, n):
            out[k] = d[i] * d[j]
            k += 1
    return out


def _unpack_full(coef, n):
    c = coef[0]
    g = coef[1:n + 1].copy()
    H = np.zeros((n, n))
    H[np.arange(n), np.arange(n)] = coef[n + 1:2 * n + 1]
    k = 2 * n + 1
    for i in range(n):
        for j in range(i + 1, n):
            H[i, j] = H[j, i] = coef[k]
            k += 1
    return c, g, H


class InterpolationSet:
    """Points, values, base point, and the maintained inverse system."""

    def __init__(self, points, base, variant, fvals=None, cvals=None):
        self.points = np.atleast_2d(np.asarray(points, dtype=float)).copy()
        self.base = np.asarray(base, dtype=float).copy()
        self.variant = variant
        npt, n = self.points.shape
        if not legal_npt(variant, n, npt):
            raise BadNpt(f"npt={npt} illegal for {variant.value} in dimension {n}")
        self.fvals = np.full(npt, np.nan) if fvals is None else \
            np.asarray(fvals, dtype=float).copy()
        self.cvals = None if cvals is None else np.atleast_2d(np.asarray(cvals, dtype=float)).copy()
        self.center_index = 0
        self.inverse = None
        self._updates_since_check = 0
        self._den_scale = 1.0
        self.refactorize()

    @property
    def npt(self):
        return self.points.shape[0]

    @property
    def n(self):
        return self.points.shape[1]

    def displacements(self):
        return self.points - self.base

    # -- matrix assembly -------------------------------------------------

    def assemble_matrix(self):
        """Coefficient matrix from scratch (also the refactorization path)."""
        d = self.displacements()
        npt, n = d.shape
        if self.variant is Variant.LINEAR_FULL:
            w = np.empty((npt, npt))
            w[:, 0] = 1.0
            w[:, 1:] = d
            return w
        if self.variant is Variant.QUADRATIC_FULL:
            return np.vstack([_phi_full(row) for row in d])
        gram = d @ d.T
        a = 0.5 * gram * gram
        x = np.vstack([np.ones(npt), d.T])
        size = npt + n + 1
        w = np.zeros((size, size))
        w[:npt, :npt] = a
        w[:npt, npt:] = x.T
        w[npt:, :npt] = x
        return w

    def refactorize(self):
        w = self.assemble_matrix()
        if self.variant is not Variant.QUADRATIC_KKT:
            cond = np.linalg.cond(w)
            if not np.isfinite(cond) or cond > COND_LIMIT:
                raise DegenerateSet(f"interpolation matrix condition {cond:.3e}")
            inv = np.linalg.inv(w)
        else:
            try:
                inv = np.linalg.inv(w)
            except np.linalg.LinAlgError as exc:
                raise SingularKKT(str(exc)) from exc
            if not np.all(np.isfinite(inv)):
                raise SingularKKT("non-finite entries in KKT inverse")
            inv = 0.5 * (inv + inv.T)
        prev = self.inverse
        self.inverse = InverseSystem(self.variant, inv)
        if prev is not None:
            self.inverse.last_denominator = prev.last_denominator
        self._updates_since_check = 0

    # -- evaluation helpers ----------------------------------------------

    def phi(self, x):
        d = np.asarray(x, dtype=float) - self.base
        if self.variant is Variant.LINEAR_FULL:
            return np.concatenate([[1.0], d])
        return _phi_full(d)

    def w_vector(self, x):
        d = np.asarray(x, dtype=float) - self.base
        prods = self.displacements() @ d
        return np.concatenate([0.5 * prods * prods, [1.0], d])

    def lagrange_values_at(self, x):
        """Values of every Lagrange function at x."""
        if self.variant is Variant.QUADRATIC_KKT:
            return (self.inverse.matrix @ self.w_vector(x))[:self.npt]
        return self.phi(x) @ self.inverse.matrix

    def denominators_for(self, x):
        """Update denominator for replacing each point in turn with x."""
        if self.variant is not Variant.QUADRATIC_KKT:
            return self.lagrange_values_at(x)
        w = self.w_vector(x)
        hw = self.inverse.matrix @ w
        tau = hw[:self.npt]
        alpha = np.diag(self.inverse.matrix)[:self.npt]
        dist4 = float(np.dot(np.asarray(x) - self.base, np.asarray(x) - self.base)) ** 2
        beta = 0.5 * dist4 - float(w @ hw)
        return alpha * beta + tau * tau

    def _den_threshold(self):
        return TINY_DEN_FACTOR * self._den_scale

    # -- updates ----------------------------------------------------------

    def smw_replace(self, drop, xnew, fnew, cnew=None, dup_tol=None):
        """Replace point ``drop`` by ``xnew`` and update the inverse in place.

        Returns the update denominator. Raises TinyDenominator when the
        update would be numerically unsafe (including duplicate points).
        """
        xnew = np.asarray(xnew, dtype=float)
        keep = np.arange(self.npt) != drop
        dists = np.linalg.norm(self.points[keep] - xnew, axis=1)
        if dup_tol is None:
            spread = np.linalg.norm(self.points - self.base, axis=1).max()
            dup_tol = DUP_TOL_FACTOR * max(1.0, spread)
        if dists.size and dists.min() < dup_tol:
            raise TinyDenominator("candidate duplicates a retained point")

        inv = self.inverse.matrix
        if self.variant is Variant.QUADRATIC_KKT:
            w = self.w_vector(xnew)
            hw = inv @ w
            alpha = inv[drop, drop]
            tau = hw[drop]
            dn = xnew - self.base
            beta = 0.5 * float(dn @ dn) ** 2 - float(w @ hw)
            den = alpha * beta + tau * tau
            if abs(den) < self._den_threshold() or not np.isfinite(den):
                raise TinyDenominator(f"sigma={den!r}")
            u1 = -hw
            u1[drop] += 1.0
            u2 = inv[:, drop].copy()
            inv += (alpha * np.outer(u1, u1) - beta * np.outer(u2, u2)
                    + tau * (np.outer(u1, u2) + np.outer(u2, u1))) / den
            inv = 0.5 * (inv + inv.T)
            self.inverse.matrix = inv
        else:
            lvals = self.phi(xnew) @ inv
            den = lvals[drop]
            if abs(den) < self._den_threshold() or not np.isfinite(den):
                raise TinyDenominator(f"lagrange denominator {den!r}")
            v = lvals.copy()
            v[drop] -= 1.0
            inv -= np.outer(inv[:, drop], v) / den

        self.points[drop] = xnew
        self.fvals[drop] = fnew
        if cnew is not None and self.cvals is not None:
            self.cvals[drop] = cnew
        risky = abs(float(den)) < RISKY_DEN_FACTOR * self._den_scale
        self.inverse.last_denominator = float(den)
        self._den_scale = max(1.0, abs(float(den)))
        self._updates_since_check += 1
        if risky or self._updates_since_check >= self.npt:
            self._drift_check()
        return float(den)

    def _drift_check(self):
        """Refactorize when the maintained inverse has drifted."""
        w = self.assemble_matrix()
        eye = np.eye(w.shape[0])
        drift = float(np.abs(w @ self.inverse.matrix - eye).max())
        self._updates_since_check = 0
        if not np.isfinite(drift) or drift > DRIFT_LIMIT:
            self.refactorize()

    def shift_base(self, new_base):
        self.base = np.asarray(new_base, dtype=float).copy()
        self.refactorize()


# -- initial patterns ----------------------------------------------------


def _axis_steps(x0, rho, lower, upper):
    """Per-axis step sizes for the first and second point on each axis."""
    n = x0.size
    plus = np.full(n, rho)
    minus = np.full(n, -rho)
    if lower is None and upper is None:
        return plus, minus
    lo = np.full(n, -np.inf) if lower is None else lower
    hi = np.full(n, np.inf) if upper is None else upper
    su = hi - x0
    sl = x0 - lo
    for i in range(n):
        if su[i] >= rho:
            plus[i] = rho
            if sl[i] >= rho:
                minus[i] = -rho
            elif su[i] >= 2 * rho:
                minus[i] = 2 * rho
            else:
                minus[i] = -sl[i] if sl[i] > 0 else 0.5 * rho
        elif sl[i] >= rho:
            plus[i] = -rho
            if sl[i] >= 2 * rho:
                minus[i] = -2 * rho
            else:
                minus[i] = su[i] if su[i] > 0 else -0.5 * rho
        else:
            # Narrow box; use what room there is on each side.
            plus[i] = su[i] if su[i] >= sl[i] else -sl[i]
            minus[i] = -sl[i] if su[i] >= sl[i] else su[i]
    return plus, minus


def _pair_indices(n, count):
    """Deterministic enumeration of ``count`` distinct index pairs."""
    if count <= 0:
        return []
    seen = set()
    out = []
    for k in range(1, n):
        for p in range(n):
            q = (p + k) % n
            key = (min(p, q), max(p, q))
            if key in seen:
                continue
            seen.add(key)
            out.append(key)
            if len(out) == count:
                return out
    return out


def init_set(x0, rho_beg, npt, variant, lower=None, upper=None):
    """Initial interpolation geometry around x0.

    Returns (set, points) where ``points`` lists the locations to evaluate,
    in set order. Bound arguments make the construction box-feasible.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    if rho_beg <= 0:
        raise ValueError("rho_beg must be positive")
    if not legal_npt(variant, n, npt):
        raise BadNpt(f"npt={npt} illegal for {variant.value} in dimension {n}")

    pts = [x0.copy()]
    if variant is Variant.LINEAR_FULL:
        for i in range(n):
            p = x0.copy()
            p[i] += rho_beg
            pts.append(p)
    else:
        plus, minus = _axis_steps(x0, rho_beg, lower, upper)
        for i in range(n):
            p = x0.copy()
            p[i] += plus[i]
            pts.append(p)
        n_minus = n if variant is Variant.QUADRATIC_FULL else min(n, npt - n - 1)
        for i in range(n_minus):
            p = x0.copy()
            p[i] += minus[i]
            pts.append(p)
        n_pairs = npt - len(pts)
        for (i, j) in _pair_indices(n, n_pairs):
            p = x0.copy()
            p[i] += plus[i]
            p[j] += plus[j]
            pts.append(p)

    points = np.vstack(pts)
    if lower is not None or upper is not None:
        lo = -np.inf if lower is None else lower
        hi = np.inf if upper is None else upper
        points = np.clip(points, lo, hi)
    iset = InterpolationSet(points, x0, variant)
    return iset, points.copy()


# -- model construction ---------------------------------------------------


def build_linear(iset: InterpolationSet) -> SurrogateModel:
    """Linear interpolant through all n+1 points, via the maintained inverse."""
    if iset.variant is not Variant.LINEAR_FULL:
        raise ValueError("build_linear requires the linear variant")
    coef = iset.inverse.matrix @ iset.fvals
    return SurrogateModel(ModelKind.LINEAR, coef[0], coef[1:], None, iset.base)


def build_linear_many(iset: InterpolationSet, values):
    """Linear interpolants of several value columns over the same set."""
    coef = iset.inverse.matrix @ np.asarray(values, dtype=float)
    out = []
    for k in range(coef.shape[1]):
        out.append(SurrogateModel(ModelKind.LINEAR, coef[0, k], coef[1:, k], None, iset.base))
    return out


def build_full_quadratic(iset: InterpolationSet) -> SurrogateModel:
    if iset.variant is not Variant.QUADRATIC_FULL:
        raise ValueError("build_full_quadratic requires the full quadratic variant")
    coef = iset.inverse.matrix @ iset.fvals
    c, g, H = _unpack_full(coef, iset.n)
    return SurrogateModel(ModelKind.QUADRATIC, c, g, H, iset.base)


def update_underdetermined(prev, iset: InterpolationSet) -> SurrogateModel:
    """Least Frobenius-norm Hessian change interpolant over the current set.

    With ``prev=None`` (the zero model) this is the minimum Frobenius norm
    interpolant; otherwise the Hessian moves as little as possible from the
    previous model while matching every stored value.
    """
    if iset.variant is not Variant.QUADRATIC_KKT:
        raise ValueError("update_underdetermined requires the KKT variant")
    n = iset.n
    npt = iset.npt
    if prev is None:
        prev = SurrogateModel(ModelKind.QUADRATIC, 0.0, np.zeros(n),
                              np.zeros((n, n)), iset.base)
    else:
        prev = prev.copy()
        if not np.array_equal(prev.base, iset.base):
            prev.rebase(iset.base)
    resid = iset.fvals - prev.value_many(iset.points)
    rhs = np.concatenate([resid, np.zeros(n + 1)])
    sol = iset.inverse.matrix @ rhs
    if not np.all(np.isfinite(sol)):
        raise SingularKKT("non-finite interpolation solution")
    lam = sol[:npt]
    d = iset.displacements()
    dh = (d * lam[:, None]).T @ d
    return SurrogateModel(ModelKind.QUADRATIC, prev.c + sol[npt],
                          prev.g + sol[npt + 1:], prev.hessian() + dh, iset.base)


def lagrange(iset: InterpolationSet, j: int) -> LagrangeFunction:
    """j-th Lagrange function of the set, read off the inverse system."""
    col = iset.inverse.matrix[:, j]
    n = iset.n
    if iset.variant is Variant.LINEAR_FULL:
        return LagrangeFunction(ModelKind.LINEAR, col[0], col[1:], None, iset.base, j)
    if iset.variant is Variant.QUADRATIC_FULL:
        c, g, H = _unpack_full(col, n)
        return LagrangeFunction(ModelKind.QUADRATIC, c, g, H, iset.base, j)
    lam = col[:iset.npt]
    d = iset.displacements()
    H = (d * lam[:, None]).T @ d
    return LagrangeFunction(ModelKind.QUADRATIC, col[iset.npt],
                            col[iset.npt + 1:], H, iset.base, j)


def smw_replace(iset: InterpolationSet, drop: int, xnew, fnew, cnew=None,
                dup_tol=None) -> float:
    return iset.smw_replace(drop, xnew, fnew, cnew=cnew, dup_tol=dup_tol)


def shift_base(iset: InterpolationSet, model: SurrogateModel, new_base) -> None:
    """Re-express the model and inverse system about a new base point."""
    if model is not None:
        model.rebase(new_base)
    iset.shift_base(new_base)


def evaluate(model: SurrogateModel, x):
    """(value, gradient) of the model at x."""
    return model.value_grad(x)


def dump(iset: InterpolationSet, model: SurrogateModel) -> str:
    """Line-oriented debug dump with 17 significant digits."""
    lines = []
    fmt = lambda v: format(float(v), ".17g")
    lines.append(f"variant {iset.variant.value} npt {iset.npt} n {iset.n}")
    lines.append("base " + " ".join(fmt(v) for v in iset.base))
    for k in range(iset.npt):
        lines.append(f"point {k} " + " ".join(fmt(v) for v in iset.points[k]))
        lines.append(f"fval {k} " + fmt(iset.fvals[k]))
    if model is not None:
        lines.append("model_c " + fmt(model.c))
        lines.append("model_g " + " ".join(fmt(v) for v in model.g))
        H = model.hessian()
        for i in range(H.shape[0]):
            lines.append(f"model_h {i} " + " ".join(fmt(v) for v in H[i]))
    return "\n".join(lines) + "\n"
