"""Exception types shared across the toolkit."""


class SnrDiffError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(SnrDiffError):
    """A config value or parameter combination is invalid; the message names the field."""


class ShapeError(SnrDiffError):
    """Array shapes disagree; the message reports both shapes."""


class StateError(SnrDiffError):
    """An operation was called in an invalid order (e.g. backward before forward)."""


class DivergenceError(SnrDiffError):
    """Training or sampling produced a non-finite value; the message reports the step."""


class CheckpointError(SnrDiffError):
    """A checkpoint file is missing, corrupt, or incompatible; the message names the field."""


class MetricError(SnrDiffError):
    """A metric was asked to compare invalid sample sets (e.g. empty)."""
