"""Exception hierarchy.

Input problems (bad schema, bad data, bad options) and numeric problems
(nonconvergence, separation) are kept on separate branches so the CLI can
map them to distinct exit codes.
"""

from __future__ import annotations


class OrdmonoError(Exception):
    """Base class for all errors raised by this package."""


class InputError(OrdmonoError):
    """Invalid user input: schema, data file, configuration, or options."""


class SchemaError(InputError):
    """Schema declaration violates an invariant (duplicate levels, k < 3, ...)."""


class UnknownLevelError(InputError):
    """A categorical value in the data is not declared in the schema."""


class MissingValueError(InputError):
    """A record lacks a value for a declared column."""


class EmptyCategoryError(InputError):
    """A declared non-baseline category has zero observations."""


class DimensionMismatchError(InputError):
    """A vector or matrix has a length incompatible with the constraint set."""


class NumericError(OrdmonoError):
    """Numerical failure during evaluation or optimization."""


class NonIncreasingInterceptsError(NumericError):
    """Intercepts are not strictly increasing; probabilities are undefined."""


class ProbabilityUnderflowError(NumericError):
    """An observed cell probability underflowed; likely separation or divergence."""


class NonconvergenceError(NumericError):
    """An iteration cap was hit before the convergence tolerance was met."""


class SeparationError(NumericError):
    """A coefficient diverged on the logit scale (quasi-complete separation)."""

    def __init__(self, message: str, column: str | None = None):
        super().__init__(message)
        self.column = column


class ConstrainedFitHasNoSEError(OrdmonoError):
    """Standard errors were requested from a constrained fit, which has none."""


class CombinationCapExceededError(OrdmonoError):
    """Too many unresolved predictors for exhaustive direction enumeration."""


class TooManyFailuresError(NumericError):
    """More than the tolerated fraction of simulation replicates failed."""
