"""Exception types shared across the package."""


class MsoptError(Exception):
    """Base class for all package-specific failures."""


class ProjectionError(MsoptError):
    """Closest-point projection undefined (outside tubular neighborhood)."""


class DivergenceError(MsoptError):
    """Iteration produced non-finite or runaway values."""


class ConfigError(MsoptError):
    """Malformed or inconsistent experiment configuration."""
