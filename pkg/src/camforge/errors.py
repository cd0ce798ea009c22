"""Exception types shared across the package."""


class CamforgeError(Exception):
    """Base class for all camforge-specific errors."""


class CaptureFormatError(CamforgeError):
    """The byte stream is not a capture container (bad magic, bad header)."""


class CaptureCorruptionError(CamforgeError):
    """The container header points outside the file or a blob is truncated."""


class CaptureValidationError(CamforgeError):
    """The container decoded but violates a structural invariant."""


class UnsupportedMethodError(CamforgeError):
    """The requested saliency method cannot run on the given capture."""


class DivergenceError(CamforgeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class UndefinedMetricError(CamforgeError):
    """No class with support; the requested metric has no value."""
