"""Exception hierarchy.

Every error raised deliberately by the package derives from
:class:`GhostTomoError`, so callers can catch the whole family at once.
"""


class GhostTomoError(Exception):
    pass


class ConfigurationError(GhostTomoError, ValueError):
    """Invalid phantom, campaign or experiment configuration."""


class ParameterError(GhostTomoError, ValueError):
    """A scalar parameter is outside its admissible range."""


class ShapeError(GhostTomoError, ValueError):
    """Array dimensions do not match."""


class CapacityError(GhostTomoError, ValueError):
    """More distinct mask shifts requested than the mask supports."""


class EmptyDataError(GhostTomoError, ValueError):
    pass


class NormalizationError(GhostTomoError, ValueError):
    pass


class GeometryError(GhostTomoError, ValueError):
    """Degenerate acquisition geometry (e.g. a single viewing angle)."""


class DomainError(GhostTomoError, ArithmeticError):
    """A logarithm was requested of a non-positive correlation value."""

    def __init__(self, message, angle_index=None, pixel=None):
        super().__init__(message)
        self.angle_index = angle_index
        self.pixel = pixel


class DivergenceError(GhostTomoError, RuntimeError):
    """Iterative solver residual kept growing."""

    def __init__(self, message, iteration=None, residuals=None):
        super().__init__(message)
        self.iteration = iteration
        self.residuals = residuals


class SolverError(GhostTomoError, RuntimeError):
    """Numerical breakdown inside a Krylov solver."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
