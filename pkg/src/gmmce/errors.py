"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Array shapes are inconsistent with the model or operation."""


class ConfigError(ValueError):
    """A configuration value is invalid or unsupported."""


class NumericError(RuntimeError):
    """A numerical operation failed (factorization, divergence, ...)."""


class DivergedError(NumericError):
    """An iterative solver produced NaN/Inf iterates."""
