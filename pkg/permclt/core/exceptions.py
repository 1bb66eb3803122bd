"""Domain error hierarchy.

Services raise these; the CLI layer is the only place that turns them into
exit codes and user-facing messages.
"""

from typing import Optional


class PermCLTError(ValueError):
    """Base class for all domain errors."""

    exit_code = 2


class ShapeError(PermCLTError):
    """Matrix is not square, or too small (n < 2)."""


class NonFiniteError(PermCLTError):
    """Input contains NaN or infinite entries."""


class ZeroMatrixError(PermCLTError):
    """The sum of squares defining a normalization vanishes."""


class NonPositiveError(PermCLTError):
    """A quantity required to be strictly positive is not."""


class InvalidPermutationError(PermCLTError):
    """Input is not a bijection on {1..n}."""


class TooLargeError(PermCLTError):
    """Exhaustive enumeration requested beyond the supported size."""


class SymmetryViolationError(PermCLTError):
    """A kernel component that must be symmetric is not."""


class NotPSDError(PermCLTError):
    """Covariance matrix is indefinite beyond the clipping tolerance."""


class ZeroAlphaError(PermCLTError):
    """The limit function alpha has zero L2 norm."""


class GridMismatchError(PermCLTError):
    """Two paths live on incompatible evaluation grids."""


class DegenerateSampleError(PermCLTError):
    """Sample has zero spread, so a goodness-of-fit test is meaningless."""


class IndexOrderError(PermCLTError):
    """Joint-moment indices must satisfy i < j."""


class RangeError(PermCLTError):
    """Argument lies outside its admissible range."""


class UnknownSuiteError(PermCLTError):
    """Requested verification suite does not exist."""


class ConfigError(PermCLTError):
    """Run configuration failed validation."""


class InsufficientDataError(PermCLTError):
    """Not enough samples for the requested statistic."""


class ParseError(PermCLTError):
    """Input file or spec string could not be parsed."""

    def __init__(
        self,
        message: str,
        source: Optional[str] = None,
        line: Optional[int] = None,
    ):
        """
        Initialize a parse error with optional location context.

        Args:
            message: What went wrong.
            source: File name or spec string being parsed.
            line: 1-based line number, when known.
        """
        self.source = source
        self.line = line
        location = ""
        if source is not None:
            location = f"{source}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")
