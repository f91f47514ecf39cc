"""Exception types shared across the package.

The CLI maps these onto exit codes: DomainError -> 2, AccuracyError
(and subclasses) -> 3.  Claim failures are data, not exceptions.
"""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class SingularityError(DomainError):
    """Evaluation requested exactly on a kernel singularity (x = y)."""


class CapacityError(RuntimeError):
    """A construction ran out of its declared budget before finishing."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class AccuracyError(ArithmeticError):
    """A numerical routine could not reach its accuracy target."""


class ResolutionError(AccuracyError):
    """A quadrature grid does not resolve the requested basis functions."""


class TruncationError(AccuracyError):
    """A truncated series/decomposition left a tail above tolerance."""
