"""Exception types raised by the toolkit."""


class GapflowError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(GapflowError, ValueError):
    """Invalid geometry or run configuration."""


class DegenerateCurvature(ConfigError):
    """Raised when the top surface is not strictly more convex than the wall."""


class OutsideNeck(GapflowError, ValueError):
    """A point lies outside the closed neck strip."""


class UnsupportedFamily(GapflowError, ValueError):
    """The requested field family has no construction for this geometry."""


class SingularSystem(GapflowError, ArithmeticError):
    """The assembled stiffness matrix has non-positive determinant."""


class NotConverged(GapflowError, RuntimeError):
    """Adaptive quadrature exhausted its cell budget."""


class InsufficientData(GapflowError, ValueError):
    """Too few distinct records for a sweep fit."""
