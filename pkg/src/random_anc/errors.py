"""Exception hierarchy shared across the package."""


class AncError(Exception):
    """Base class for every error raised by random_anc."""


class ShapeError(AncError, ValueError):
    """Operand shapes do not conform."""


class NumericError(AncError, ArithmeticError):
    """A non-finite value showed up where a finite one is required."""


class TapeError(AncError, RuntimeError):
    """Misuse of the gradient tape (e.g. backward on a tensor it never saw)."""


class KeyPoolError(AncError, ValueError):
    """Bad key-generation arguments or a key outside the pool."""


class FramingError(AncError, ValueError):
    """A bit stream whose length does not divide into whole words."""


class ModelNotConvergedError(AncError, RuntimeError):
    """Refusal to encrypt with a model that never reached full recovery."""


class ModelFileError(AncError):
    """Base class for model bundle load failures."""


class FormatError(ModelFileError):
    """Wrong magic bytes: not a model bundle."""


class VersionError(ModelFileError):
    """Bundle written by an unsupported format version."""


class TruncatedFileError(ModelFileError):
    """Bundle ends before its declared payload does."""


class ChecksumError(ModelFileError):
    """Payload bytes do not match the stored CRC-32."""


class DimensionError(ModelFileError):
    """Header dimensions are inconsistent with the payload."""
