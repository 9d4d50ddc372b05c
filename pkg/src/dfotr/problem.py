"""Problem statement, classification, preprocessing, and the moderated barrier.

A problem is

    min f(x)  s.t.  l <= x <= u,  A_I x <= b_I,  A_E x = b_E,
                    c_I(x) <= 0,  c_E(x) = 0,

with every constraint group optional. Objective and nonlinear constraints
are available through function values only.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import CallbackPanic, InconsistentEqualities, InfeasibleBounds
from . import _convex

HUGE_DEFAULT = 1e30


@dataclass(frozen=True)
class BarrierConfig:
    """Moderation constants for failed or unbounded evaluations."""

    hugefun: float = HUGE_DEFAULT
    hugecon: float = HUGE_DEFAULT

    def __post_init__(self):
        for name in ("hugefun", "hugecon"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive, got {v!r}")


class ProblemType(enum.Enum):
    UNCONSTRAINED = "unconstrained"
    BOUND_CONSTRAINED = "bound-constrained"
    LINEARLY_CONSTRAINED = "linearly-constrained"
    NONLINEARLY_CONSTRAINED = "nonlinearly-constrained"


def _as_constraint_pair(pair, n, name):
    if pair is None:
        return None
    a, b = pair
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"{name}: matrix has {a.shape[0]} rows but rhs has {b.shape[0]}")
    if a.shape[1] != n:
        raise ValueError(f"{name}: matrix has {a.shape[1]} columns, expected {n}")
    if a.shape[0] == 0:
        return None
    return a, b


class Problem:
    """Immutable statement of an optimization problem.

    The objective may return NaN or infinities; moderation is applied by
    :func:`wrap_with_barrier`, not here. Nonlinear constraints are callbacks
    returning vectors (c_I(x) <= 0 and c_E(x) = 0 conventions).
    """

    def __init__(self, objective, x0, lower=None, upper=None, lin_ineq=None,
                 lin_eq=None, nl_ineq=None, nl_eq=None):
        if not callable(objective):
            raise TypeError("objective must be callable")
        self.objective = objective
        self.x0 = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
        if self.x0.ndim != 1 or self.x0.size == 0:
            raise ValueError("x0 must be a nonempty vector")
        n = self.x0.size
        self.dim = n

        self.lower = np.full(n, -np.inf) if lower is None else \
            np.broadcast_to(np.asarray(lower, dtype=float), (n,)).copy()
        self.upper = np.full(n, np.inf) if upper is None else \
            np.broadcast_to(np.asarray(upper, dtype=float), (n,)).copy()
        both = np.isfinite(self.lower) & np.isfinite(self.upper)
        if np.any(self.lower[both] > self.upper[both]):
            raise InfeasibleBounds("lower bound exceeds upper bound")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ValueError("bounds must not contain NaN")

        self.lin_ineq = _as_constraint_pair(lin_ineq, n, "lin_ineq")
        self.lin_eq = _as_constraint_pair(lin_eq, n, "lin_eq")
        self.nl_ineq = nl_ineq
        self.nl_eq = nl_eq
        if nl_ineq is not None and not callable(nl_ineq):
            raise TypeError("nl_ineq must be callable")
        if nl_eq is not None and not callable(nl_eq):
            raise TypeError("nl_eq must be callable")

    def has_finite_bounds(self):
        return bool(np.any(np.isfinite(self.lower)) or np.any(np.isfinite(self.upper)))

    def replace(self, **kwargs):
        """New Problem sharing every field not overridden."""
        base = dict(
            objective=self.objective, x0=self.x0, lower=self.lower,
            upper=self.upper, lin_ineq=self.lin_ineq, lin_eq=self.lin_eq,
            nl_ineq=self.nl_ineq, nl_eq=self.nl_eq,
        )
        base.update(kwargs)
        return Problem(**base)


@dataclass
class AffineReduction:
    """Affine map x = offset + basis @ z onto the equality-feasible set."""

    basis: np.ndarray
    offset: np.ndarray
    rank: int

    def to_full(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if self.basis.shape[1] == 0:
            return self.offset.copy()
        return self.offset + self.basis @ z

    def to_reduced(self, x):
        return self.basis.T @ (np.asarray(x, dtype=float) - self.offset)


def classify(problem: Problem) -> ProblemType:
    """Most restrictive category implied by the constraint groups present."""
    if problem.nl_ineq is not None or problem.nl_eq is not None:
        return ProblemType.NONLINEARLY_CONSTRAINED
    if problem.lin_ineq is not None or problem.lin_eq is not None:
        return ProblemType.LINEARLY_CONSTRAINED
    if problem.has_finite_bounds():
        return ProblemType.BOUND_CONSTRAINED
    return ProblemType.UNCONSTRAINED


def eliminate_equalities(problem: Problem):
    """Reduce away consistent linear equalities via pivoted QR.

    Returns (reduced_problem, AffineReduction). Bounds transfer exactly when
    the null-space basis is a signed coordinate selection; otherwise finite
    bound rows become linear inequalities on the reduced variables.
    """
    if problem.lin_eq is None:
        raise ValueError("problem has no linear equality constraints")
    a_eq, b_eq = problem.lin_eq
    n = problem.dim
    scale = max(1.0, float(np.abs(a_eq).max()), float(np.abs(b_eq).max()))

    q, r, piv = scipy.linalg.qr(a_eq.T, mode="full", pivoting=True)
    diag = np.abs(np.diag(r)) if min(r.shape) else np.array([])
    rank = int(np.sum(diag > 1e-12 * max(scale, 1.0))) if diag.size else 0
    basis = q[:, rank:]

    offset, *_ = np.linalg.lstsq(a_eq, b_eq, rcond=None)
    resid = float(np.abs(a_eq @ offset - b_eq).max()) if a_eq.size else 0.0
    if resid > 1e-10 * scale:
        raise InconsistentEqualities(
            f"equality residual {resid:.3e} exceeds tolerance; problem infeasible")

    reduction = AffineReduction(basis=basis, offset=offset, rank=rank)
    n_red = n - rank

    fun = problem.objective
    reduced_obj = lambda z: fun(reduction.to_full(z))

    lower_red = np.full(n_red, -np.inf)
    upper_red = np.full(n_red, np.inf)
    extra_ineq_rows = []
    extra_ineq_rhs = []
    if problem.has_finite_bounds() and n_red > 0:
        aligned = _signed_selection(basis)
        if aligned is not None:
            for j, (i, s) in enumerate(aligned):
                lo, hi = problem.lower[i], problem.upper[i]
                off = reduction.offset[i]
                if s > 0:
                    lower_red[j], upper_red[j] = lo - off, hi - off
                else:
                    lower_red[j], upper_red[j] = off - hi, off - lo
        else:
            for i in range(n):
                row = basis[i]
                if np.abs(row).max() == 0.0:
                    continue
                if np.isfinite(problem.upper[i]):
                    extra_ineq_rows.append(row.copy())
                    extra_ineq_rhs.append(problem.upper[i] - reduction.offset[i])
                if np.isfinite(problem.lower[i]):
                    extra_ineq_rows.append(-row.copy())
                    extra_ineq_rhs.append(reduction.offset[i] - problem.lower[i])

    lin_ineq_red = None
    rows = []
    rhs = []
    if problem.lin_ineq is not None:
        a_i, b_i = problem.lin_ineq
        rows.append(a_i @ basis)
        rhs.append(b_i - a_i @ offset)
    if extra_ineq_rows:
        rows.append(np.vstack(extra_ineq_rows))
        rhs.append(np.array(extra_ineq_rhs))
    if rows and n_red > 0:
        lin_ineq_red = (np.vstack(rows), np.concatenate(rhs))

    nl_ineq_red = None
    nl_eq_red = None
    if problem.nl_ineq is not None:
        nli = problem.nl_ineq
        nl_ineq_red = lambda z: nli(reduction.to_full(z))
    if problem.nl_eq is not None:
        nle = problem.nl_eq
        nl_eq_red = lambda z: nle(reduction.to_full(z))

    z0 = reduction.to_reduced(problem.x0) if n_red > 0 else np.zeros(0)
    if n_red == 0:
        reduced = _ZeroDimProblem(reduced_obj, nl_ineq_red, nl_eq_red)
        return reduced, reduction
    reduced = Problem(reduced_obj, z0, lower=lower_red, upper=upper_red,
                      lin_ineq=lin_ineq_red, nl_ineq=nl_ineq_red, nl_eq=nl_eq_red)
    return reduced, reduction


class _ZeroDimProblem:
    """Placeholder for fully determined problems (rank A_E == n)."""

    dim = 0

    def __init__(self, objective, nl_ineq=None, nl_eq=None):
        self.objective = objective
        self.nl_ineq = nl_ineq
        self.nl_eq = nl_eq


def _signed_selection(basis):
    """If basis columns are +-unit coordinate vectors, return [(row, sign)]."""
    out = []
    for j in range(basis.shape[1]):
        col = basis[:, j]
        nz = np.where(np.abs(col) > 1e-12)[0]
        if nz.size != 1 or abs(abs(col[nz[0]]) - 1.0) > 1e-12:
            return None
        out.append((int(nz[0]), 1.0 if col[nz[0]] > 0 else -1.0))
    return out


def project_start(x0, lower=None, upper=None, lin_ineq=None, lin_eq=None):
    """Project the starting point onto the bound/linear feasible set.

    Returns x0 unchanged when it is already feasible (1e-12 slack) or when the
    projection subproblem is detected infeasible; projection failures are
    reported through the unchanged point rather than raised.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    lo = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    hi = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    a_i, b_i = lin_ineq if lin_ineq is not None else (None, None)
    a_e, b_e = lin_eq if lin_eq is not None else (None, None)

    slack = 1e-12 * max(1.0, float(np.abs(x0).max()))
    feasible = np.all(x0 >= lo - slack) and np.all(x0 <= hi + slack)
    if feasible and a_i is not None:
        bscale = max(1.0, float(np.abs(b_i).max()))
        feasible = np.all(a_i @ x0 - b_i <= slack * bscale)
    if feasible and a_e is not None:
        bscale = max(1.0, float(np.abs(b_e).max()))
        feasible = np.abs(a_e @ x0 - b_e).max() <= slack * bscale
    if feasible:
        return x0.copy()

    x, ok = _convex.projection_qp(x0, lo, hi, a_i, b_i, a_e, b_e)
    if not ok or x is None:
        return x0.copy()
    return x


def moderate(raw, cfg: BarrierConfig = BarrierConfig()) -> float:
    """Map a raw extended-real objective value to a finite one."""
    v = float(raw)
    if math.isnan(v):
        return cfg.hugefun
    if v > cfg.hugefun:
        return cfg.hugefun
    if v == -math.inf:
        return -cfg.hugefun
    return v


def moderate_constraints(raw, cfg: BarrierConfig = BarrierConfig()):
    """Elementwise moderation of constraint values with the hugecon constant."""
    arr = np.atleast_1d(np.asarray(raw, dtype=float)).copy()
    arr[np.isnan(arr)] = cfg.hugecon
    arr[arr > cfg.hugecon] = cfg.hugecon
    arr[arr == -np.inf] = -cfg.hugecon
    return arr


@dataclass
class EvalRecord:
    index: int
    x: np.ndarray
    raw: float
    moderated: float


class RunRecord:
    """Per-evaluation history owned by a single solve (single writer)."""

    def __init__(self):
        self.entries: list[EvalRecord] = []

    def append(self, x, raw, moderated):
        self.entries.append(EvalRecord(len(self.entries) + 1, np.array(x, dtype=float),
                                       float(raw), float(moderated)))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def raw_values(self):
        return np.array([e.raw for e in self.entries])

    def moderated_values(self):
        return np.array([e.moderated for e in self.entries])


def best_of_record(record: RunRecord, merit=None):
    """Index of the reported best entry.

    Restricted to entries with finite raw objective; ties and ordering follow
    the supplied per-entry merit (defaults to the moderated value). Falls back
    to the best moderated value when no raw value is finite.
    """
    if len(record) == 0:
        return None
    if merit is None:
        merit = [e.moderated for e in record.entries]
    finite = [i for i, e in enumerate(record.entries) if math.isfinite(e.raw)]
    pool = finite if finite else range(len(record.entries))
    return min(pool, key=lambda i: (merit[i], i))


def wrap_with_barrier(problem: Problem, cfg: BarrierConfig, record: RunRecord,
                      enabled: bool = True) -> Problem:
    """Problem whose callbacks moderate values and log into the record.

    User exceptions surface as CallbackPanic and are never swallowed. With
    ``enabled=False`` values are recorded but passed through unmoderated,
    which is only meant for the no-barrier benchmark comparison.
    """
    fun = problem.objective

    def guarded_objective(x):
        try:
            raw = fun(np.asarray(x, dtype=float))
        except Exception as exc:  # noqa: BLE001 - deliberate barrier
            raise CallbackPanic(f"objective raised at evaluation "
                                f"{len(record) + 1}: {exc!r}") from exc
        raw = float(raw)
        mod = moderate(raw, cfg) if enabled else raw
        record.append(x, raw, mod)
        return mod

    def wrap_con(con):
        if con is None:
            return None

        def guarded(x):
            try:
                raw = con(np.asarray(x, dtype=float))
            except Exception as exc:  # noqa: BLE001
                raise CallbackPanic(f"constraint callback raised: {exc!r}") from exc
            if enabled:
                return moderate_constraints(raw, cfg)
            return np.atleast_1d(np.asarray(raw, dtype=float))

        return guarded

    return problem.replace(objective=guarded_objective,
                           nl_ineq=wrap_con(problem.nl_ineq),
                           nl_eq=wrap_con(problem.nl_eq))
