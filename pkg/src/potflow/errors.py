"""Exception hierarchy shared by all modules."""


class PotflowError(Exception):
    """Base class for every error raised by the package."""


class DomainError(PotflowError, ValueError):
    """An argument lies outside the domain of the operation."""


class NotSubsonicError(DomainError):
    """A speed is sonic/supersonic, or exceeds the configured subsonic margin."""


class SingularPointError(DomainError):
    """Evaluation at a singular point (origin, form center, cone vertex)."""


class ConfigurationError(PotflowError, ValueError):
    """Inconsistent or invalid configuration."""


class InfeasibleFluxError(DomainError):
    """Mass flux exceeds the sonic maximum of rho*q."""


class InsufficientDataError(PotflowError):
    """Too few usable samples for a fit."""


class ModeError(PotflowError):
    """Operation not defined for the given gas mode."""


class ConservationError(PotflowError):
    """Discrete flux conservation violated beyond tolerance."""


class LinearSolveError(PotflowError):
    """The linear solver failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NonConvergenceError(PotflowError):
    """Picard iteration diverged or ran out of iterations."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)
