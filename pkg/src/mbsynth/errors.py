"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """Raised when an argument violates an operation's precondition."""


class FormatError(ValueError):
    """Raised when a serialized artifact (weight file, WAV, bank file) is malformed."""
