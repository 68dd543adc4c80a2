"""Shared exception base for the idvault engine.

Every module defines its own concrete error types next to the code that
raises them; they all inherit from IdVaultError so callers (gateway, CLI)
can catch engine failures in one place without swallowing genuine bugs.
"""


class IdVaultError(Exception):
    """Base class for all errors raised by idvault components."""


class ConfigError(IdVaultError):
    """Service configuration is missing or invalid."""
