"""Exception types raised by the solvers and preprocessing helpers."""


class DfotrError(Exception):
    """Base class for all library errors."""


class InconsistentEqualities(DfotrError):
    """Linear equality constraints have no solution within tolerance."""


class InfeasibleBounds(DfotrError):
    """Some lower bound exceeds the corresponding upper bound."""


class CallbackPanic(DfotrError):
    """A user callback raised; the original exception is chained."""


class BadNpt(DfotrError):
    """Number of interpolation points outside the legal range for the variant."""


class DegenerateSet(DfotrError):
    """Interpolation set numerically rank deficient."""


class SingularKKT(DfotrError):
    """The KKT coefficient matrix of the interpolation system is singular."""


class TinyDenominator(DfotrError):
    """Replacing this point would make the inverse update unsafe."""


class AllTinyDenominators(DfotrError):
    """No interpolation point can be safely replaced; a geometry step is needed."""


class DimensionTooSmall(DfotrError):
    """The solver cannot handle problems of this dimension."""
