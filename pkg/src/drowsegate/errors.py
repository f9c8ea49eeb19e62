"""Exception types shared across the toolkit."""


class DrowsegateError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(DrowsegateError, ValueError):
    """An argument violates a documented precondition."""


class ParseError(DrowsegateError):
    """A cascade file, config file, or sidecar file could not be parsed."""


class UnsupportedCascade(DrowsegateError):
    """The cascade file parsed but uses features this detector does not run."""


class FaceTooSmall(DrowsegateError):
    """Face rectangle below the minimum size for eye-region placement."""


class NoGradients(DrowsegateError):
    """Region is too flat to yield any participating gradient samples."""


class NoInteriorMaximum(DrowsegateError):
    """Every objective maximum was pruned as border-connected."""


class Unclassifiable(DrowsegateError):
    """Face chip carries no gradients anywhere; open/closed is undecidable."""


class OrderingViolation(DrowsegateError):
    """Observations must be fed to the state machine in frame order."""


class InvalidDataset(DrowsegateError):
    """Evaluation dataset directory does not match the expected layout."""


class FrameDecodeError(DrowsegateError):
    """A frame in the source could not be decoded."""
