"""Exception types raised across the package."""


class ModelSetError(Exception):
    """Base class for all package errors."""


class NonSquareFree(ModelSetError):
    pass


class SingularBasis(ModelSetError):
    pass


class RegionTooLarge(ModelSetError):
    pass


class DimensionTooLarge(ModelSetError):
    pass


class NotUnimodular(ModelSetError):
    pass


class ZeroVolumeWindow(ModelSetError):
    pass


class InsufficientTruncation(ModelSetError):
    pass


class BoundaryHit(ModelSetError):
    pass


class IncompleteSupport(ModelSetError):
    pass


class DegenerateFit(ModelSetError):
    pass


class OutOfRange(ModelSetError):
    pass


class ConfigError(ModelSetError):
    """Config failed schema validation; ``path`` is a JSON pointer."""

    def __init__(self, message, path=""):
        super().__init__(f"{path or '/'}: {message}")
        self.path = path
