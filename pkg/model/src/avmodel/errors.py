"""Exception types raised across the model package."""


class AvmodelError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(AvmodelError):
    """An array does not have the layout an operation requires."""


class FormatError(AvmodelError):
    """A file does not conform to the expected on-disk layout."""


class IoFailure(AvmodelError):
    pass


class ConfigError(AvmodelError):
    pass
