"""Exception hierarchy shared by every stage of the pipeline."""
from typing import Optional


class SpikingSeizureError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SpikingSeizureError, ValueError):
    """Invalid configuration or command-line usage."""


class InputError(SpikingSeizureError, ValueError):
    """Input values rejected before any computation, e.g. non-finite samples."""


class StructuralError(SpikingSeizureError, ValueError):
    """Shape or topology mismatch between tensors, layers or weights."""


class CalibrationError(SpikingSeizureError, ValueError):
    """Threshold calibration could not run on the given data."""


class FormatError(SpikingSeizureError, ValueError):
    """A file violates its binary or text format.

    Parameters
    ----------
    message : str
        Human readable description.
    offset : int, optional
        Byte offset where the violation was detected.
    """

    def __init__(self, message: str, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnsupportedVersionError(FormatError):
    """File format version newer than this code understands."""


class UnsupportedFeatureError(FormatError):
    """File uses a feature of its format that is deliberately not read (EDF+, mixed rates)."""


class DivergenceError(SpikingSeizureError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"Training diverged at epoch {epoch}: loss = {loss}")
        self.epoch = epoch
        self.loss = loss
