"""Run configuration schemas."""

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from permclt.core.config import settings
from permclt.core.exceptions import ConfigError

SourceName = Literal["y", "prelimit", "limit", "integral", "tableau"]


class RunConfig(BaseModel):
    """Schema for one Monte Carlo run."""

    n: int = Field(..., ge=1)
    samples: int = Field(..., ge=1)
    seed: int = Field(default=settings.DEFAULT_SEED, ge=0, lt=2**64)
    workers: int = Field(default_factory=lambda: settings.WORKERS, ge=1)
    grid: list[float] = Field(default_factory=lambda: [0.25, 0.5, 0.75, 1.0])
    functionals: list[str] = Field(default_factory=list)

    # Path source
    source: SourceName = "y"
    family: Optional[str] = None
    input_path: Optional[str] = None
    mode: Literal["canonical", "tilde", "simple"] = "canonical"
    kernel: str = "tableau"
    alpha: str = "tableau"
    prelimit_method: Literal["exact", "factorized"] = "exact"
    refine: int = Field(default=4, ge=1)

    model_config = {"extra": "forbid"}

    @field_validator("grid")
    @classmethod
    def grid_in_unit_interval(cls, grid: list[float]) -> list[float]:
        if not grid:
            raise ValueError("grid must not be empty")
        if any(not 0.0 <= t <= 1.0 for t in grid):
            raise ValueError("grid times must lie in [0, 1]")
        if any(b < a for a, b in zip(grid, grid[1:])):
            raise ValueError("grid must be sorted")
        return grid

    @model_validator(mode="after")
    def source_inputs(self) -> "RunConfig":
        if self.source in ("y", "prelimit") and self.family is None and self.input_path is None:
            self.family = f"exceedance:{self.n}"
        return self


class CommandSpec(BaseModel):
    """Schema for a resolved CLI invocation."""

    subcommand: str
    inputs: dict[str, Any] = Field(default_factory=dict)
    config: Optional[RunConfig] = None
    out: Optional[str] = None
    format: Literal["json", "csv"] = "json"


def build_run_config(**values: Any) -> RunConfig:
    """
    Validate run parameters.

    Raises:
        ConfigError: With pydantic's message when validation fails.
    """
    try:
        return RunConfig(**values)
    except ValidationError as exc:
        raise ConfigError(_describe(exc)) from exc


def load_run_config(document: dict[str, Any]) -> RunConfig:
    """
    Rebuild a RunConfig from a result document or a bare config mapping.

    Raises:
        ConfigError: If no valid config block is present.
    """
    block = document.get("config", document) if isinstance(document, dict) else None
    if not isinstance(block, dict):
        raise ConfigError("document has no config block")
    return build_run_config(**block)


def _describe(exc: ValidationError) -> str:
    parts = []
    for error in exc.errors():
        where = ".".join(str(p) for p in error["loc"]) or "config"
        parts.append(f"{where}: {error['msg']}")
    return "; ".join(parts)


class VerifyOptions(BaseModel):
    """Schema for verification-suite parameters; unset sizes fall back to each suite's default."""

    n: Optional[int] = Field(default=None, ge=2)
    samples: Optional[int] = Field(default=None, ge=1)
    trials: int = Field(default=20, ge=1)
    seed: int = Field(default=settings.DEFAULT_SEED, ge=0, lt=2**64)
    workers: int = Field(default_factory=lambda: settings.WORKERS, ge=1)

    model_config = {"extra": "forbid"}


def build_verify_options(**values: Any) -> VerifyOptions:
    """
    Validate verification parameters.

    Raises:
        ConfigError: With pydantic's message when validation fails.
    """
    try:
        return VerifyOptions(**values)
    except ValidationError as exc:
        raise ConfigError(_describe(exc)) from exc
