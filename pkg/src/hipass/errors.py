"""Exception types shared across the toolkit."""


class HipassError(Exception):
    """Base class for all toolkit-specific errors."""


class DimensionError(HipassError, ValueError):
    """Shapes or extents incompatible with an operation's contract."""


class PreconditionError(HipassError, ValueError):
    """An argument violates a documented precondition."""


class FormatError(HipassError, ValueError):
    """A file does not conform to the expected on-disk format."""


class DivergenceError(HipassError, RuntimeError):
    """Training produced a non-finite loss."""
