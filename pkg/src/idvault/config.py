"""Service configuration: defaults, JSON file, IDVAULT_* environment, flags.

Precedence is lowest to highest: built-in defaults, then the config file,
then environment variables, then command-line flags. The config file is a
JSON object whose keys mirror ServiceConfig field names in snake_case.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .errors import ConfigError

DEFAULT_PORT = 1337
DEFAULT_TOKEN_TTL_SECONDS = 30 * 24 * 3600
DEFAULT_MAX_UPLOAD_BYTES = 10 * 1024 * 1024

ENV_PREFIX = "IDVAULT_"

_INT_KEYS = ("port", "token_ttl_seconds", "max_upload_bytes", "auto_verify_seconds")
_STR_KEYS = ("data_dir", "jwt_secret", "verification_url")


@dataclass
class ServiceConfig:
    port: int = DEFAULT_PORT
    data_dir: str = "data"
    jwt_secret: str = ""
    token_ttl_seconds: int = DEFAULT_TOKEN_TTL_SECONDS
    max_upload_bytes: int = DEFAULT_MAX_UPLOAD_BYTES
    cors_allowed_origins: list[str] = field(default_factory=list)
    verification_url: Optional[str] = None
    auto_verify_seconds: int = 0  # 0 disables the background verifier

    def check_for_serve(self) -> None:
        if not self.jwt_secret:
            raise ConfigError("jwt_secret must be set (config file, IDVAULT_JWT_SECRET, or --jwt-secret)")
        if not (1 <= self.port <= 65535):
            raise ConfigError(f"port must be in 1..65535, got {self.port}")
        if self.max_upload_bytes <= 0:
            raise ConfigError("max_upload_bytes must be positive")
        if self.token_ttl_seconds <= 0:
            raise ConfigError("token_ttl_seconds must be positive")


def _apply(config: ServiceConfig, key: str, value: Any, source: str) -> None:
    if key in _INT_KEYS:
        try:
            setattr(config, key, int(value))
        except (TypeError, ValueError):
            raise ConfigError(f"{source}: {key} must be an integer, got {value!r}") from None
    elif key in _STR_KEYS:
        setattr(config, key, str(value))
    elif key == "cors_allowed_origins":
        if isinstance(value, str):
            value = [origin.strip() for origin in value.split(",") if origin.strip()]
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{source}: cors_allowed_origins must be a list of origins")
        config.cors_allowed_origins = value
    else:
        raise ConfigError(f"{source}: unknown config key {key!r}")


def load_config(
    config_path: Optional[str] = None,
    overrides: Optional[dict[str, Any]] = None,
    env: Optional[dict[str, str]] = None,
) -> ServiceConfig:
    config = ServiceConfig()
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise ConfigError(f"config file {config_path!r} does not exist")
        try:
            data = json.loads(path.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {config_path!r} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {config_path!r} must hold a JSON object")
        for key, value in data.items():
            _apply(config, key, value, f"config file {config_path!r}")
    environment = os.environ if env is None else env
    for key in _INT_KEYS + _STR_KEYS + ("cors_allowed_origins",):
        env_name = ENV_PREFIX + key.upper()
        if env_name in environment:
            _apply(config, key, environment[env_name], f"environment {env_name}")
    for key, value in (overrides or {}).items():
        if value is not None:
            _apply(config, key, value, "command line")
    return config
