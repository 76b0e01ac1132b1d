"""Exception types shared across the package."""


class SkewLabError(Exception):
    """Base class for all skewlab errors."""


class InvalidInputError(SkewLabError):
    """An argument violates a documented precondition."""


class NumericFailureError(SkewLabError):
    """A numeric routine (root finder, LP solver) failed to converge."""


class EstimationFailureError(SkewLabError):
    """An empirical fit produced a non-decaying or otherwise unusable result."""


class InvariantViolationError(SkewLabError):
    """A computed value left its admissible range beyond tolerance."""


class CapExceededError(SkewLabError):
    """Support consolidation could not reach the requested atom cap."""
