"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or unknown experiment configuration."""


class SeriesTooShortError(ValueError):
    """An arrival series does not cover the requested detection span."""


class UndefinedEyeError(ValueError):
    """Eye metrics need at least one '0' and one '1' symbol."""
