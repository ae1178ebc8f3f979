"""Exception hierarchy shared across the package."""


class HeatSingError(Exception):
    """Base class for all package-specific errors."""


class NegativeEigenvalueError(HeatSingError):
    """Circulant embedding produced an eigenvalue below the numerical tolerance."""


class OutOfDomainError(HeatSingError):
    """Time argument outside the trajectory's domain."""


class GridTooCoarseError(HeatSingError):
    """Too few tabulated radii to evaluate a quadrature reliably."""


class NonpositiveTimeError(HeatSingError):
    """Heat kernel evaluated at t <= 0."""


class ToleranceNotMetError(HeatSingError):
    """Adaptive quadrature stalled before reaching the requested accuracy."""


class AtSingularPointError(HeatSingError):
    """Source density requested exactly at the singular point."""


class UnsupportedInitialDataError(HeatSingError):
    """Initial data spec not in the supported family."""


class DegenerateWindowError(HeatSingError):
    """Fit window empty, too small, or otherwise unusable."""


class NonpositiveMassError(HeatSingError):
    """Log-log fit requested on nonpositive mass values."""


class GridMismatchError(HeatSingError):
    """Radius grids of two curves do not line up as required."""


class AlphaOutOfRangeError(HeatSingError):
    """Holder exponent outside the range where the removability test applies."""


class EnsembleTooSmallError(HeatSingError):
    """Moment estimation requested on an ensemble below the minimum size."""


class ConfigError(HeatSingError):
    """Malformed or out-of-range experiment configuration."""
