"""Score matrix, normalization and covariance-structure types."""

from dataclasses import dataclass
from enum import Enum

import numpy as np


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=float, copy=True)
    out.setflags(write=False)
    return out


class NormalizationMode(str, Enum):
    """How the scale factor s(a) is chosen."""

    CANONICAL = "canonical"
    TILDE = "tilde"
    SIMPLE = "simple"
    CUSTOM = "custom"


@dataclass(frozen=True)
class ScoreMatrix:
    """
    Raw scores a0 together with the row-centered matrix a.

    Attributes:
        n: Matrix dimension (n >= 2).
        a0: Raw scores.
        a: Row-centered scores, a(i,j) = a0(i,j) - row_means[i].
        row_means: Row means of a0.
        col_means: Column means of a.
        grand_mean: Mean of all entries of a0.
    """

    n: int
    a0: np.ndarray
    a: np.ndarray
    row_means: np.ndarray
    col_means: np.ndarray
    grand_mean: float

    def __post_init__(self):
        for name in ("a0", "a", "row_means", "col_means"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def scale(self) -> float:
        """Largest absolute raw score (used to scale tolerances)."""
        return float(np.max(np.abs(self.a0))) if self.a0.size else 0.0


@dataclass(frozen=True)
class Normalization:
    """Scale factor s > 0 and the rule that produced it."""

    mode: NormalizationMode
    s: float

    @property
    def s2(self) -> float:
        return self.s * self.s


@dataclass(frozen=True)
class SigmaMatrix:
    """Covariance matrix of the increments W_i of the pre-limit process."""

    n: int
    sigma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sigma", _frozen(self.sigma))

    def partial_sums(self) -> np.ndarray:
        """
        Cumulative sums over both indices.

        Returns:
            (n+1)x(n+1) array P with P[k, l] = sum_{i<=k, j<=l} sigma_ij,
            i.e. Cov(Z_n(k/n), Z_n(l/n)).
        """
        out = np.zeros((self.n + 1, self.n + 1))
        out[1:, 1:] = np.cumsum(np.cumsum(self.sigma, axis=0), axis=1)
        return out
