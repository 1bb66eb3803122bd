"""Result document and verification report schemas."""

from datetime import datetime, timezone
from typing import Any, Optional

from pydantic import BaseModel, Field

from permclt.core.config import settings
from permclt.core.rng import rng_metadata


class Metadata(BaseModel):
    """Schema for run metadata."""

    seed: int
    rng: dict[str, Any]
    workers: int
    version: str = settings.APP_VERSION
    timestamp: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    @classmethod
    def for_run(cls, seed: int, workers: int) -> "Metadata":
        return cls(seed=seed, rng=rng_metadata(seed), workers=workers)


class ResultDocument(BaseModel):
    """
    Schema shared by every subcommand's JSON output.

    Command-specific payload keys (grid, means, covariances, checks, ...)
    are stored as extra fields and serialized next to the fixed ones.
    """

    schema_version: str = Field(default=settings.SCHEMA_VERSION, serialization_alias="schema")
    command: str
    config: dict[str, Any]
    metadata: Metadata

    model_config = {"extra": "allow"}

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True, indent=2)

    def to_dict(self) -> dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True)


class CheckResult(BaseModel):
    """Schema for one verification check."""

    name: str
    target: Optional[float] = None
    estimate: Optional[float] = None
    se: Optional[float] = None
    tolerance: Optional[float] = None
    passed: bool
    detail: str = ""


class SuiteReport(BaseModel):
    """Schema for one verification suite."""

    suite: str
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)


class VerifyReport(BaseModel):
    """Schema for a verification run over one or more suites."""

    suites: list[SuiteReport]

    @property
    def passed(self) -> bool:
        return all(suite.passed for suite in self.suites)

    def summary(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "suites": [
                {"suite": s.suite, "passed": s.passed, "checks": [c.model_dump() for c in s.checks]}
                for s in self.suites
            ],
        }

    def table(self) -> str:
        """Human-readable table of every check."""
        lines = [f"{'suite':<18} {'check':<44} {'target':>12} {'estimate':>12} {'se/tol':>10}  result"]
        for suite in self.suites:
            for c in suite.checks:
                bound = c.se if c.se is not None else c.tolerance
                lines.append(
                    f"{suite.suite:<18} {c.name:<44} {_fmt(c.target):>12} {_fmt(c.estimate):>12} "
                    f"{_fmt(bound):>10}  {'PASS' if c.passed else 'FAIL'}"
                )
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.6g}"
