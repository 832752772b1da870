"""Exception types shared across the package."""


class RvRootError(Exception):
    """Base class for all package errors."""


class ContractViolation(RvRootError, ValueError):
    """An input broke a documented precondition (shape, symmetry, range)."""


class NumericalError(RvRootError, ArithmeticError):
    """A numerical kernel failed to converge or produced an unusable result."""


class RankDeficiency(NumericalError):
    pass


class InconsistencyError(NumericalError):
    """Two independent computations of the same quantity disagree."""


class EstimationFailure(RvRootError):
    """The estimator could not produce the requested number of DOAs."""


class GratingLobeError(EstimationFailure):
    """A root's phase maps outside the arcsin domain."""


class TheoremViolation(RvRootError):
    """An even-element array produced no real-axis root pair."""
