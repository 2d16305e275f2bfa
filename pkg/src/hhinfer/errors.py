"""Exception types raised across the package."""


class HHInferError(Exception):
    """Base class for package errors."""


class DomainError(HHInferError, ValueError):
    """An argument lies outside the domain of an operation."""


class NumericalInstabilityError(HHInferError, ArithmeticError):
    """The final-size solver produced values failing its residual check."""


class InfeasibleDatasetError(HHInferError, ValueError):
    """A dataset admits no compatible household structure."""
