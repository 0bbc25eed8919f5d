"""Exception types shared across the package."""


class GailBiasError(Exception):
    """Base class for all package errors."""


class ConfigurationError(GailBiasError):
    """Invalid environment spec, run config, or hyperparameter."""


class UsageError(GailBiasError):
    """An operation was called outside its contract (wrong dims, terminated env, ...)."""


class PlanningError(GailBiasError):
    """The expert planner could not find a task-completing plan."""


class DatasetError(GailBiasError):
    """Trajectory dataset I/O or format failure."""


class TrainingError(GailBiasError):
    """A training run aborted; carries the frame count at failure."""

    def __init__(self, message, frames=None):
        super().__init__(message if frames is None else f"{message} (at frame {frames})")
        self.frames = frames
