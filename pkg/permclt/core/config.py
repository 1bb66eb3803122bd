"""Application configuration management using Pydantic Settings."""

from typing import ClassVar

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings.

    Only the default worker count is read from the environment
    (``PERMCLT_WORKERS``); everything else is a fixed class constant.
    """

    # Parallel sampling
    WORKERS: int = Field(default=1, ge=1)

    # Application Configuration
    APP_NAME: ClassVar[str] = "permclt"
    APP_VERSION: ClassVar[str] = "1.0.0"
    SCHEMA_VERSION: ClassVar[str] = "1"

    # Random streams
    RNG_NAME: ClassVar[str] = "philox4x64-10"
    DEFAULT_SEED: ClassVar[int] = 20260101

    # Monte Carlo plumbing; chunk size fixes the substream layout, so
    # results do not depend on the worker count.
    CHUNK_SIZE: ClassVar[int] = 2000
    SE_MULTIPLIER: ClassVar[float] = 4.0
    ENUMERATION_LIMIT: ClassVar[int] = 8

    # Numerical tolerances
    CENTERING_ULPS: ClassVar[float] = 8.0
    PSD_TOL: ClassVar[float] = 1e-10
    SYMMETRY_TOL: ClassVar[float] = 1e-10
    JITTER_LADDER: ClassVar[tuple[float, ...]] = (1e-12, 1e-11, 1e-10, 1e-9, 1e-8)
    NOT_PSD_TOL: ClassVar[float] = 1e-8

    model_config = SettingsConfigDict(
        env_prefix="PERMCLT_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


# Global settings instance
settings = Settings()
