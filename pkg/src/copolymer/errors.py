"""Exception taxonomy shared across the package (mapped to CLI exit codes)."""


class ConfigError(ValueError):
    """Invalid configuration or parameter domain violation (CLI exit 1)."""


class GuardError(ValueError):
    """Precondition / enumeration-budget violation (CLI exit 2)."""


class NumericsError(AssertionError):
    """Internal numerical consistency check failed (CLI exit 3)."""
