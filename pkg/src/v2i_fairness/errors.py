"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid configuration value; ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class ModelDomainError(ValueError):
    """Inputs lie outside the analytic model's domain of validity."""
