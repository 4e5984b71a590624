"""Exception hierarchy shared by every motordyn subpackage."""


class MotorDynError(Exception):
    """Base class for all errors raised by motordyn."""


class InvalidInputError(MotorDynError, ValueError):
    pass


class ShapeError(MotorDynError, ValueError):
    pass


class ConfigError(MotorDynError, ValueError):
    pass


class CheckpointError(MotorDynError):
    pass


class IntegrationDivergedError(MotorDynError, RuntimeError):
    """The motor ODE produced a non-finite state.

    ``time`` is the simulated time (seconds) of the step that failed.
    """

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class TrainingDivergedError(MotorDynError, RuntimeError):
    def __init__(self, message, epoch=None, batch=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


class LayerStateError(MotorDynError, RuntimeError):
    """backward() called without a matching forward()."""
