"""Exception types raised across the package."""


class ConfigError(ValueError):
    """A configuration value is out of its allowed range."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ShapeError(ValueError):
    """Array lengths or dimensions do not agree."""


class ValidationError(ValueError):
    """Input data violates a documented precondition."""


class FormatError(ValueError):
    """A binary file does not follow the IDX layout."""

    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} (at byte offset {offset})")
