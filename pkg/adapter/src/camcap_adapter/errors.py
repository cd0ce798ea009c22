class AdapterError(Exception):
    """Base class for adapter failures."""


class ConfigurationError(AdapterError):
    """Unknown model id or unusable model configuration."""


class StageValidationError(AdapterError):
    """A stage specification is malformed (duplicates, bad module path)."""
