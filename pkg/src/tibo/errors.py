"""Exception types raised by the solver."""


class TiboError(ValueError):
    """Base class for validation errors."""


class GridError(TiboError):
    """Grid parameters that cannot be realised (non power of two, non-integral anchors)."""


class SymmetryError(TiboError):
    """Grid samples that are not odd-symmetric."""

    def __init__(self, message, max_asymmetry=float("nan")):
        super().__init__(message)
        self.max_asymmetry = max_asymmetry


class SingularBoundaryError(TiboError):
    """The 2x2 system for the integration constants is singular."""

    def __init__(self, message, matrix=None):
        super().__init__(message)
        self.matrix = matrix


class NonFiniteResidualError(TiboError, ArithmeticError):
    """The right-hand side produced a non-finite value at a grid slot."""

    def __init__(self, message, index=-1):
        super().__init__(message)
        self.index = index


class ConfigError(TiboError):
    """Malformed solver configuration file."""


class IntegrationError(TiboError, ArithmeticError):
    """The Runge-Kutta state became non-finite."""

    def __init__(self, message, step=-1):
        super().__init__(message)
        self.step = step
