"""Exception hierarchy shared by the file formats and parameter checks."""


class ParameterError(ValueError):
    """A configuration or spec field is out of its valid range."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class ShapeError(ValueError):
    pass


class FormatError(ValueError):
    """Base class for malformed EMAP / VDST / VMLP / EPLOG files."""


class MagicError(FormatError):
    pass


class VersionError(FormatError):
    pass


class HeaderError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


class SizeMismatchError(FormatError):
    pass


class CollectionError(RuntimeError):
    pass


class PolicyError(RuntimeError):
    pass


class ControllerError(RuntimeError):
    pass


class OutOfMapError(RuntimeError):
    """A wheel contact point fell outside the elevation map."""
