"""Trust-region derivative-free optimization.

Five interpolation-based solvers behind one front end: linear models with an
l-infinity merit for general constraints, fully determined quadratics, and
underdetermined quadratics updated in the least-Frobenius-norm sense for
unconstrained, bound-constrained, and linearly constrained problems.
"""

from .drivers import (SolveResult, SolverOptions, Status, run_bobyqa,
                      run_cobyla, run_lincoa, run_newuoa, run_uobyqa)
from .frontend import SolverId, select_solver, solve
from .problem import (BarrierConfig, Problem, ProblemType, RunRecord,
                      classify, eliminate_equalities, moderate, project_start,
                      wrap_with_barrier)
from . import exceptions

__version__ = "0.1.0"


def _method_call(method):
    def call(objective, x0, opts=None, lower=None, upper=None, lin_ineq=None,
             lin_eq=None, nl_ineq=None, nl_eq=None):
        problem = Problem(objective, x0, lower=lower, upper=upper,
                          lin_ineq=lin_ineq, lin_eq=lin_eq, nl_ineq=nl_ineq,
                          nl_eq=nl_eq)
        return solve(problem, opts=opts, method=method)

    call.__name__ = method or "auto"
    call.__doc__ = (f"Solve with the {method} driver (falling back when "
                    f"incapable)." if method else
                    "Solve with automatic solver selection.")
    return call


cobyla = _method_call("cobyla")
uobyqa = _method_call("uobyqa")
newuoa = _method_call("newuoa")
bobyqa = _method_call("bobyqa")
lincoa = _method_call("lincoa")

__all__ = [
    "Problem", "ProblemType", "BarrierConfig", "RunRecord",
    "classify", "eliminate_equalities", "project_start", "moderate",
    "wrap_with_barrier", "solve", "select_solver", "SolverId",
    "SolverOptions", "SolveResult", "Status",
    "run_cobyla", "run_uobyqa", "run_newuoa", "run_bobyqa", "run_lincoa",
    "cobyla", "uobyqa", "newuoa", "bobyqa", "lincoa", "exceptions",
]
