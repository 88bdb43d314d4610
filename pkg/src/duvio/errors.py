"""Exception types shared across the package."""


class DuvioError(Exception):
    """Base class for all errors raised by this package."""


class LoadError(DuvioError):
    """A referenced file or directory is missing or unreadable."""


class ValidationError(DuvioError):
    """Input data violates a structural invariant (order, shape, range)."""


class CoverageError(DuvioError):
    """A sensor stream does not cover a required time interval."""


class InterpolationRangeError(DuvioError):
    """A query time lies outside the supported interpolation range."""


class ShapeError(DuvioError):
    """An array does not have the expected shape."""

    def __init__(self, expected, got, what="array"):
        super().__init__(f"{what}: expected shape {tuple(expected)}, got {tuple(got)}")
        self.expected = tuple(expected)
        self.got = tuple(got)


class ConfigError(DuvioError):
    """One or more configuration violations; carries the full list."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
