class SoftGamesError(Exception):
    """Base class for all package errors."""


class ConfigError(SoftGamesError):
    """Invalid configuration, file, or argument (CLI exit code 2)."""


class DivergenceError(SoftGamesError):
    """Numeric divergence: value iteration budget exceeded, NaN loss,
    or a runaway rationality estimate (CLI exit code 3)."""
