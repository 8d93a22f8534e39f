"""Exception types shared across the package."""


class ImcmcError(Exception):
    """Base class for all package errors."""


class ConfigError(ImcmcError):
    """Invalid kernel, layout, or run configuration."""


class DensityError(ImcmcError):
    """A density or gradient evaluation produced an invalid value."""


class FixedPointError(ImcmcError):
    """An implicit integrator step failed to converge."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class EnumerationError(ImcmcError):
    """Exact enumeration of a kernel is impossible or exceeds the size cap."""


class DegenerateSeriesError(ImcmcError):
    """A diagnostic was asked to process a constant or too-short series."""
