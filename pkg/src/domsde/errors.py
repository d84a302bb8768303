"""Exception types shared across the toolkit."""


class DomsdeError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(DomsdeError):
    """Invalid configuration (unknown key, missing key, out-of-range value)."""


class DimensionMismatchError(ConfigError):
    """Point dimension does not match the domain/coefficient dimension."""


class PreconditionError(DomsdeError):
    """A documented operation precondition was violated."""


class SingularityError(DomsdeError):
    """A coefficient or gradient was evaluated exactly at a singular point."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class StencilError(DomsdeError):
    """A finite-difference stencil does not fit inside the domain."""

    def __init__(self, message, required_clearance=None):
        super().__init__(message)
        self.required_clearance = required_clearance


class EmptyRegionError(DomsdeError):
    """No grid or sample point fell inside the requested region."""


class SingularDiffusionError(DomsdeError):
    """sigma(t, x) was not invertible where inversion was required."""
