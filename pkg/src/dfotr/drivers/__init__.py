"""Solver main loops and their shared state machinery."""

from .base import (SolveResult, SolverOptions, Status, TrustRegionState,
                   reduce_rho, select_drop_tr, update_radius)
from .cobyla import run_cobyla
from .quadloop import run_bobyqa, run_lincoa, run_newuoa, run_uobyqa

__all__ = [
    "SolveResult", "SolverOptions", "Status", "TrustRegionState",
    "reduce_rho", "select_drop_tr", "update_radius",
    "run_bobyqa", "run_cobyla", "run_lincoa", "run_newuoa", "run_uobyqa",
]
