"""Shared exception types."""


class SteklovLabError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(SteklovLabError):
    """A hypothesis or structural check on inputs failed."""


class NumericalError(SteklovLabError):
    """A numerical procedure failed (factorization, convergence, ...)."""


class NoSpectrumError(SteklovLabError):
    """The weight Gram matrix vanishes; there is no eigenproblem to solve."""


class ResonantClusterError(SteklovLabError):
    """The requested spectral gap is closed within tolerance."""


class DeltaResonanceError(NumericalError):
    """The linear boundary operator is singular at the chosen resolvent value."""


class ConfigError(SteklovLabError):
    """A run configuration is malformed.  Carries the offending key path."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")
