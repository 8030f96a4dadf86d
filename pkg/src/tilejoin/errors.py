"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented precondition."""


class BoundsError(ValidationError):
    """A tile load or store would touch memory outside the buffer."""


class ParseError(ValidationError):
    """A dataset file is malformed."""


class ResourceError(RuntimeError):
    """A guard against oversized work was hit."""
