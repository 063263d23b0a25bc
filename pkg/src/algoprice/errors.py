"""Exception types shared across the package."""


class AlgopriceError(Exception):
    """Base class for all package errors."""


class DomainError(AlgopriceError, ValueError):
    """Input outside the valid domain of an operation."""


class GridMismatchError(DomainError):
    """Table and price grid of different sizes were combined."""


class InvalidPDError(DomainError):
    """A 2x2 payoff table does not have prisoner's-dilemma structure."""


class CalibrationError(AlgopriceError, RuntimeError):
    """Demand calibration failed; carries the residuals at the best point."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class NoFixedPairError(AlgopriceError, ValueError):
    """An algorithm pair admits no consistent fixed price pair (cycles only)."""


class CycleForbiddenError(AlgopriceError, ValueError):
    """A cycle outcome was produced while the policy forbids cycles."""


class InfeasibleSuccessorError(AlgopriceError, ValueError):
    """Algorithm recovery was asked for conflicting price assignments."""


class InternalConsistencyError(AlgopriceError, RuntimeError):
    """Computed payoff tables violate their defining identities."""


class ExtractionError(AlgopriceError, ValueError):
    """A target payoff could not be traced through the payoff sets."""
