"""Exception types raised across the package."""


class DelayLiftError(Exception):
    """Base class for all package errors."""


class SpectrumHit(DelayLiftError):
    """The requested resolvent point is (numerically) an eigenvalue."""


class NegativeTime(DelayLiftError):
    pass


class OffGridTime(DelayLiftError):
    """A time is not an integer multiple of the delay-line step r/m."""


class GridMismatch(DelayLiftError):
    """Signal or segment sampling is incompatible with the requested grid."""


class SingularBoundarySystem(DelayLiftError):
    pass


class NoConvergence(DelayLiftError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateSample(DelayLiftError):
    pass


class BadSpec(DelayLiftError):
    pass


class ParseError(DelayLiftError):
    pass


class ValidationError(DelayLiftError):
    def __init__(self, key_path, constraint):
        super().__init__(f"{key_path}: {constraint}")
        self.key_path = key_path
        self.constraint = constraint
