"""Shared driver state, options, results, and update rules."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import AllTinyDenominators
from ..problem import BarrierConfig, RunRecord


class Status(enum.Enum):
    RHO_END_REACHED = "rho-end-reached"
    MAX_EVALS = "max-evals"
    TARGET_REACHED = "target-reached"
    CALLBACK_ERROR = "callback-error"


@dataclass
class SolverOptions:
    """Options shared by every driver.

    npt and max_evals default to 2n+1 and 500n when left unset. The
    deterministic flag documents that drivers hold no hidden randomness; it
    has no effect and exists so callers can assert the contract explicitly.
    barrier_enabled=False disables moderation (benchmark comparison only).
    """

    rho_beg: float = 1.0
    rho_end: float = 1e-6
    npt: int | None = None
    max_evals: int | None = None
    target: float | None = None
    deterministic: bool = True
    barrier: BarrierConfig = field(default_factory=BarrierConfig)
    barrier_enabled: bool = True
    trace: object = None

    def validate(self):
        if not (0 < self.rho_end <= self.rho_beg):
            raise ValueError("need 0 < rho_end <= rho_beg")

    def resolved_npt(self, n):
        return self.npt if self.npt is not None else 2 * n + 1

    def resolved_max_evals(self, n):
        return self.max_evals if self.max_evals is not None else 500 * n


@dataclass
class TrustRegionState:
    x_k: np.ndarray
    delta: float
    rho: float
    rho_beg: float
    rho_end: float
    iteration: int = 0
    last_ratio: float = -math.inf


@dataclass
class SolveResult:
    x: np.ndarray
    fun: float
    status: Status
    neval: int
    history: RunRecord
    constraint_violation: float = 0.0
    warnings: list = field(default_factory=list)
    message: str = ""
    solver: str = ""

    @property
    def success(self):
        return self.status in (Status.RHO_END_REACHED, Status.TARGET_REACHED)


def update_radius(state: TrustRegionState, ratio: float) -> None:
    """Trust-region radius update with the resolution floor.

    Shrink by half below ratio 0.1, hold through 0.7, then grow by at most a
    factor of two capped at the next multiple of ten resolutions.
    """
    state.last_ratio = ratio
    if ratio < 0.1:
        state.delta = max(state.rho, 0.5 * state.delta)
    elif ratio > 0.7:
        cap = 10.0 * state.rho * math.ceil(state.delta / (10.0 * state.rho))
        state.delta = max(state.rho, min(2.0 * state.delta, cap))


def reduce_rho(state: TrustRegionState) -> None:
    """Staged reduction of the resolution: tenth, geometric mean, then floor."""
    old = state.rho
    if old <= 16.0 * state.rho_end:
        new = state.rho_end
    elif old <= 250.0 * state.rho_end:
        new = math.sqrt(old * state.rho_end)
    else:
        new = 0.1 * old
    state.rho = new
    state.delta = max(0.5 * old, new)


def select_drop_tr(iset, trial, state: TrustRegionState, power: int,
                   den_threshold=None):
    """Index to drop when admitting a trust-region trial point.

    Maximizes |denominator| weighted by distance from the center (farther
    points are strongly preferred); never returns the center index.
    """
    dens = iset.denominators_for(trial)
    dists = np.linalg.norm(iset.points - state.x_k, axis=1)
    ref = max(state.delta, state.rho)
    weights = np.abs(dens) * np.maximum(1.0, dists / ref) ** power
    if den_threshold is None:
        den_threshold = 1e-12 * max(1.0, float(np.abs(dens).max(initial=0.0)))
    ok = np.isfinite(weights) & (np.abs(dens) >= den_threshold)
    ok[iset.center_index] = False
    if not np.any(ok):
        raise AllTinyDenominators("no safe replacement for the trial point")
    weights = np.where(ok, weights, -np.inf)
    return int(np.argmax(weights))


def emit_trace(opts: SolverOptions, state: TrustRegionState, neval, best_f, merit):
    if opts.trace is None:
        return
    opts.trace(f"iter {state.iteration} neval {neval} delta {state.delta:.6e} "
               f"rho {state.rho:.6e} best {best_f:.17g} merit {merit:.17g}")
