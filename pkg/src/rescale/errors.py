"""Exception types shared by the solvers and the command line runner."""


class RescaleError(Exception):
    """Base class for every error raised by the package."""


class DimensionError(RescaleError, ValueError):
    pass


class StepSizeError(RescaleError, ValueError):
    pass


class WindowError(RescaleError, ValueError):
    pass


class MassMismatchError(RescaleError, ValueError):
    pass


class NegativeDensityError(RescaleError, ValueError):
    pass


class ExponentRangeError(RescaleError, ValueError):
    pass


class ConfigError(RescaleError, ValueError):
    """Invalid run configuration (CLI exit code 1)."""


class RunAborted(RescaleError, RuntimeError):
    """A run stopped because its model left the regime where it is valid.

    ``partial`` holds whatever the solver had produced up to that point.
    The CLI maps these to exit code 2.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class CollapseError(RunAborted):
    pass


class ShockDetected(RunAborted):
    pass


class BoundaryReached(RunAborted):
    pass
