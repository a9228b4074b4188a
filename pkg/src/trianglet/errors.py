"""Exception hierarchy shared by every module."""


class TriangletError(Exception):
    """Base class for all errors raised by trianglet."""


class ContractViolation(TriangletError, ValueError):
    """An argument breaks a documented precondition (shape, Hermiticity, ...)."""


class DomainError(TriangletError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class AllLossError(DomainError):
    """A lossy channel post-selects on an event of (numerically) zero weight."""


class NumericalIntegrityError(TriangletError, ArithmeticError):
    """A computed quantity left its admissible range by more than round-off."""


class ReconstructionFailed(TriangletError, RuntimeError):
    """MLE iteration cap hit before convergence; carries the best iterate."""

    def __init__(self, message, best_rho=None, log_likelihood=None):
        super().__init__(message)
        self.best_rho = best_rho
        self.log_likelihood = log_likelihood


class ConfigError(TriangletError, ValueError):
    """A run configuration failed schema validation."""


class TableExhaustedWarning(UserWarning):
    """Event matching ran out of records in one of the four AB tables."""
