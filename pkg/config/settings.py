"""
Process settings and logging setup.

Values come from the environment (optionally a .env file in the working
directory) and never from experiment configs.
"""

import logging
import os
import sys
from functools import lru_cache
from typing import Optional

import structlog
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from core.exceptions import ConfigError

ENV_PREFIX = "CAVITYECHO_"


class Settings(BaseModel):
    """Environment-driven settings shared by the CLI and library callers"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    log_level: str = Field("INFO", description="stdlib level name")
    log_format: str = Field("console", description="console or json")
    n_jobs: int = Field(1, description="worker count for η-node parallelism")

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        level = value.upper()
        if not isinstance(logging.getLevelName(level), int):
            raise ValueError(f"unknown log level {value!r}")
        return level

    @field_validator("log_format")
    @classmethod
    def _known_format(cls, value: str) -> str:
        fmt = value.lower()
        if fmt not in ("console", "json"):
            raise ValueError("log format must be 'console' or 'json'")
        return fmt

    @field_validator("n_jobs")
    @classmethod
    def _nonzero_jobs(cls, value: int) -> int:
        if value == 0:
            raise ValueError("n_jobs must be nonzero (-1 means all cores)")
        return value


def _from_env(name: str) -> Optional[str]:
    value = os.getenv(ENV_PREFIX + name)
    return value if value not in (None, "") else None


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    load_dotenv()
    raw = {
        "log_level": _from_env("LOG_LEVEL"),
        "log_format": _from_env("LOG_FORMAT"),
        "n_jobs": _from_env("N_JOBS"),
    }
    try:
        return Settings(**{k: v for k, v in raw.items() if v is not None})
    except ValidationError as exc:
        issues = [(None, f"{ENV_PREFIX}{'.'.join(map(str, e['loc'])).upper()}: {e['msg']}") for e in exc.errors()]
        raise ConfigError("invalid environment settings", issues=issues) from exc


def configure_logging(settings: Optional[Settings] = None) -> None:
    """Single structlog setup; logs go to stderr so stdout stays clean"""
    cfg = settings or get_settings()
    logging.basicConfig(
        level=getattr(logging, cfg.log_level),
        format="%(message)s",
        stream=sys.stderr,
        force=True,
    )
    renderer = (
        structlog.processors.JSONRenderer()
        if cfg.log_format == "json"
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.format_exc_info,
            renderer,
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )
