import os
from functools import lru_cache
from pathlib import Path

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-level settings read from the environment."""

    log: str = Field("INFO", description="Log verbosity (RADCAM_LOG)")
    threads: int = Field(
        default_factory=lambda: os.cpu_count() or 1,
        description="Worker threads for generation and evaluation",
    )
    config_file: Path = Field(
        Path("radcam_config.yaml"),
        description="Run configuration file used when --config is omitted",
    )

    @field_validator("log")
    @classmethod
    def check_log_level(cls, value: str) -> str:
        """Accept only level names loguru knows."""
        value = value.upper()
        known = {
            "TRACE",
            "DEBUG",
            "INFO",
            "SUCCESS",
            "WARNING",
            "ERROR",
            "CRITICAL",
        }
        if value not in known:
            raise ValueError(f"unknown log level '{value}'")
        return value

    @field_validator("threads")
    @classmethod
    def check_threads(cls, value: int) -> int:
        """Require at least one worker."""
        if value < 1:
            raise ValueError("threads must be >= 1")
        return value

    model_config = SettingsConfigDict(
        env_prefix="RADCAM_",
        env_file=".env",
        extra="ignore",
    )


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Get the cached process settings.

    Returns
    -------
        Settings instance
    """
    return Settings()
