"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Unusable run or grid parameters."""


class ShapeError(ValueError):
    """Field and grid shapes do not match."""


class StabilityError(RuntimeError):
    """Requested time step exceeds the explicit-scheme stability limit."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NumericsError(FloatingPointError):
    """NaN/Inf encountered during time stepping."""


class ResolutionError(ValueError):
    """Requested length scale is not resolvable on the grid."""
