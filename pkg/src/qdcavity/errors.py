"""Exception hierarchy shared by all qdcavity modules."""


class QDCavityError(Exception):
    """Base class for every error raised by this package."""


class InvalidCutoffError(QDCavityError, ValueError):
    pass


class CompositionError(QDCavityError, ValueError):
    pass


class InvalidParamsError(QDCavityError, ValueError):
    pass


class DegenerateSteadyStateError(QDCavityError):
    """The generator has more than one stationary state."""


class SolverError(QDCavityError):
    """A linear solve did not reach the requested residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PropagationError(QDCavityError):
    def __init__(self, message, t_reached=None):
        super().__init__(message)
        self.t_reached = t_reached


class CutoffOverflowError(QDCavityError):
    pass


class UndefinedNormalizationError(QDCavityError, ValueError):
    pass


class WindowError(QDCavityError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DomainError(QDCavityError, ValueError):
    pass


class UndefinedRatioError(QDCavityError, ValueError):
    pass


class InvalidFilterError(QDCavityError, ValueError):
    pass


class DegenerateSplitterError(QDCavityError, ValueError):
    pass


class AlignmentError(QDCavityError, ValueError):
    pass


class UndefinedVisibilityError(QDCavityError, ValueError):
    pass


class TrajectoryError(QDCavityError):
    pass


class ConfigError(QDCavityError, ValueError):
    pass
