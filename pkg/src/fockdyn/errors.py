class FockdynError(Exception):
    """Base class for errors raised by fockdyn."""


class BudgetExceeded(FockdynError):
    """A requested stage, truncation or sweep is larger than the configured budget."""


class SliceError(FockdynError, ValueError):
    """A vector lies outside a letter slice, or the slice is not closed under U."""


class ConfigError(FockdynError, ValueError):
    """Malformed scenario configuration or CLI arguments."""
