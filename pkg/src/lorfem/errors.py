class LorfemError(Exception):
    """Base class for library errors."""


class NotSPDError(LorfemError, ValueError):
    """A matrix expected to be symmetric positive definite is not."""


class InvariantError(LorfemError):
    """A structural invariant (symmetry, kernel, ...) was violated at runtime."""


class ConfigError(LorfemError, ValueError):
    """Invalid experiment configuration."""
