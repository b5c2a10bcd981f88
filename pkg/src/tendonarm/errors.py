"""Exception types shared across the package."""


class TendonArmError(Exception):
    """Base class for all package errors."""


class DomainError(TendonArmError):
    """Input outside the valid domain (joint limits, negative tension, bad config)."""


class SolverError(TendonArmError):
    """Equilibrium solver failed to converge; carries the last residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e} N*m)")
        self.residual = residual


class EstimationError(TendonArmError):
    """Joint-angle estimation did not converge; carries the last residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e} mm)")
        self.residual = residual


class TrainingError(TendonArmError):
    """Surrogate training diverged or was misconfigured."""


class DataError(TendonArmError):
    """Malformed trajectory/frame data."""
