"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Incompatible or invalid matrix/operator dimensions."""


class NumericError(RuntimeError):
    """A numerical routine failed (non-convergence, singular system, non-finite loss)."""


class ConfigError(ValueError):
    """Invalid experiment or optimizer configuration."""
