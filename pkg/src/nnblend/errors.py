"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Tensor or kernel dimensions do not satisfy an operation's contract."""


class FormatError(ValueError):
    """A serialized stream violates its documented byte format."""


class MagicError(FormatError):
    """Stream does not start with the expected magic bytes."""


class VersionError(FormatError):
    """Stream carries an unsupported format version."""


class TruncationError(FormatError):
    """Stream ends before the declared payload is complete."""
