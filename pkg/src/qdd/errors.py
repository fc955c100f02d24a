"""Exception hierarchy shared by the solver modules."""


class QDDError(Exception):
    """Base class for all package errors."""


class GridError(QDDError, ValueError):
    """Invalid grid construction or mismatched grids."""


class BoundaryConditionError(QDDError, ValueError):
    pass


class CoefficientNotPositive(QDDError, ValueError):
    pass


class SolvabilityViolation(QDDError, ValueError):
    """The Neumann source does not integrate to zero."""


class NewtonDiverged(QDDError, RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class PicardDiverged(QDDError, RuntimeError):
    pass


class StepFailed(QDDError, RuntimeError):
    pass


class DeltaTooLarge(QDDError, ValueError):
    pass


class DegenerateRatio(QDDError, ValueError):
    pass


class ConfigError(QDDError, ValueError):
    pass
