"""Exception types shared by the package."""


class InvalidResolutionError(ValueError):
    """Grid parameters outside the supported range."""


class DimensionError(ValueError):
    """Arrays that do not live on the same grid or state space."""


class DiagonalSingularityError(ValueError):
    """A collision kernel was evaluated on its diagonal v = w."""


class AssemblyError(RuntimeError):
    """Assembled collision matrices violate a structural invariant."""


class ConditioningError(RuntimeError):
    """A linear solve is too ill-conditioned to be trusted."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class NearEigenvalueError(ConditioningError):
    """A resolvent was requested too close to the spectrum."""


class DiscretizationError(RuntimeError):
    """A quantity that must be positive came out nonpositive."""


class NonConvergenceError(RuntimeError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(self, message, residual=None, last=None):
        super().__init__(message)
        self.residual = residual
        self.last = last


class EigenSolverError(RuntimeError):
    """Dense or targeted eigensolve failed validation."""


class ChannelDeadError(ValueError):
    """A decay channel has too few positive samples to fit."""


class ModeFailureError(RuntimeError):
    """Too many Fourier modes failed to propagate."""


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
