"""Exception types shared across the package.

Every error raised by the library derives from :class:`GjepaError` so the
CLI can separate our failures (exit 1, structured message) from bugs.
"""


class GjepaError(Exception):
    """Base class for all library errors."""


class ShapeError(GjepaError):
    """Operands have incompatible dimensions."""


class DegenerateSampleError(GjepaError):
    """A sampling step produced an empty node set and resampling failed."""


class DegenerateMaskError(GjepaError):
    """A pooling mask selects no nodes."""


class DivergenceError(GjepaError):
    """Non-finite values reached the optimizer."""


class CovarianceCollapseError(GjepaError):
    """A mixture component's density became non-finite despite regularization."""


class EmptyComponentError(GjepaError):
    """A mixture component lost all responsibility mass."""


class DegenerateSplitError(GjepaError):
    """A train split is missing at least one class."""


class CheckpointError(GjepaError):
    """A checkpoint file is malformed or does not match the graph."""


class DatasetError(GjepaError):
    """Base class for dataset loading failures."""

    def __init__(self, message: str, path=None, line: int | None = None):
        loc = ""
        if path is not None:
            loc = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + loc)
        self.path = path
        self.line = line


class ParseError(DatasetError):
    """A dataset file failed to parse."""


class CountMismatchError(DatasetError):
    """Loaded contents disagree with the manifest's declared counts."""


class ChecksumError(DatasetError):
    """A dataset file's checksum does not match the manifest."""


class IndexRangeError(DatasetError):
    """A node index in a dataset file is out of range."""
