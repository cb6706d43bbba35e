"""Exception hierarchy shared by all twosdr modules."""


class TwosdrError(Exception):
    """Base class for all library errors."""


class InvalidInputError(TwosdrError, ValueError):
    """Malformed or out-of-contract input (bad shapes, NaNs, bad ranks)."""


class DegenerateDataError(TwosdrError):
    """Data carries no usable variation (e.g. all samples identical)."""


class DegenerateSpectrumError(TwosdrError):
    """An eigenvalue tie makes a spectral formula ill-defined."""


class SelectionFailedError(TwosdrError):
    """Every candidate in a rank-selection grid was degenerate."""


class FormatError(TwosdrError):
    """A file failed to parse.  ``offset`` locates the problem when known."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class PerfectReconstruction(TwosdrError):
    """Raised by psnr when MSE is exactly zero (PSNR would be infinite)."""
