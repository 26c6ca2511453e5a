"""Exception types shared across the library."""


class MrarlError(Exception):
    """Base class for all library-specific errors."""


class SingularMatrixError(MrarlError):
    """A linear system that must be solvable is (numerically) singular."""


class NotPsdError(MrarlError):
    """A matrix required to be positive semidefinite has a negative eigenvalue."""


class ConvergenceError(MrarlError):
    """An iterative solver exhausted its budget without meeting tolerance."""


class MatchingError(MrarlError):
    """Model mismatch does not lie in the input matrix image."""


class DivergenceError(MrarlError):
    """Simulation state escaped the admissible region.

    Carries the time of blow-up in ``t``.
    """

    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t


class WindowError(MrarlError):
    """An analysis window is longer than the available data."""


class ConfigError(MrarlError):
    """An experiment configuration is malformed or inconsistent."""
