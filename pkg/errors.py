"""
Exception hierarchy shared by every package in the toolkit
"""


class DrillError(Exception):
    """Base class for all toolkit errors"""


class ShapeError(DrillError, ValueError):
    """Operand shapes are incompatible"""


class ConfigurationError(DrillError, ValueError):
    """A configuration value or combination of values is invalid"""


class DataError(DrillError):
    """Corpus or evaluation data is unusable"""


class UsageError(DrillError, RuntimeError):
    """An API was called out of order (e.g. backward twice on one tape)"""


class LabelIndexError(DrillError, IndexError):
    """A label or token id lies outside the vocabulary"""


class NonFiniteError(DrillError, FloatingPointError):
    """An operation produced NaN or Inf"""


class OraclePreconditionError(DrillError):
    """The finite-difference oracle was handed a non-deterministic function"""


class CheckpointError(DrillError):
    """A checkpoint file is corrupt, truncated, or incompatible"""


class DivergenceError(DrillError):
    """Training produced a non-finite loss"""

    def __init__(self, epoch: int, window_index: int, loss: float):
        self.epoch = epoch
        self.window_index = window_index
        self.loss = loss
        super().__init__(
            f"non-finite training loss {loss!r} at epoch {epoch}, window {window_index}"
        )
