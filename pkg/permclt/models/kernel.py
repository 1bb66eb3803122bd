"""Gaussian model types: pre-limit surrogate, limit kernels and alpha families."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from permclt.models.score import Normalization, ScoreMatrix, SigmaMatrix

UnaryFn = Callable[[np.ndarray], np.ndarray]
BinaryFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PreLimitModel:
    """Score matrix, its normalization and the matching increment covariance."""

    score: ScoreMatrix
    norm: Normalization
    sigma: SigmaMatrix

    @property
    def n(self) -> int:
        return self.score.n


class KernelForm(str, Enum):
    CLOSED = "closed_form"
    GRIDDED = "gridded"


@dataclass(frozen=True)
class Factorization:
    """
    Symmetric factor of a covariance matrix on a grid.

    Attributes:
        factor: Matrix L with L @ L.T reproducing the (regularized) covariance.
        method: "cholesky" or "eigh".
        jitter: Diagonal jitter that was added (0 if none).
        clipped: Number of negative eigenvalues clipped to zero.
    """

    factor: np.ndarray
    method: str
    jitter: float
    clipped: int

    def describe(self) -> dict:
        return {"method": self.method, "jitter": self.jitter, "clipped": self.clipped}


@dataclass(frozen=True)
class LimitKernel:
    """
    Covariance sigma(t,u) = f(t ^ u) - g(t,u) of a limit Gaussian process.

    A closed-form kernel carries ``f`` and ``g``; a gridded kernel carries
    ``grid`` and the matrix ``values`` of sigma on it.
    """

    name: str
    form: KernelForm
    f: Optional[UnaryFn] = None
    g: Optional[BinaryFn] = None
    grid: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    _factor_cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __call__(self, t, u) -> np.ndarray:
        """Evaluate sigma at (t, u), broadcasting."""
        t = np.asarray(t, dtype=float)
        u = np.asarray(u, dtype=float)
        if self.form is KernelForm.CLOSED:
            return self.f(np.minimum(t, u)) - self.g(t, u)
        i = np.clip(np.searchsorted(self.grid, t + 1e-12, side="right") - 1, 0, len(self.grid) - 1)
        j = np.clip(np.searchsorted(self.grid, u + 1e-12, side="right") - 1, 0, len(self.grid) - 1)
        return self.values[i, j]

    def matrix(self, grid: np.ndarray) -> np.ndarray:
        """Covariance matrix sigma(t_i, t_j) on ``grid``."""
        grid = np.asarray(grid, dtype=float)
        return self(grid[:, None], grid[None, :])


@dataclass(frozen=True)
class AlphaFamily:
    """
    Step function alpha_n induced by a score matrix and its limit alpha.

    alpha_n(v, w) = a(ceil(n v), ceil(n w)); the derived norms are computed
    once by the service that builds the family.
    """

    name: str
    n: int
    alpha_n: np.ndarray
    alpha: BinaryFn
    norm2: float
    norm_inf: float
    alpha_plus: float
    eps_norm2: float
    eps_tilde_norm2: float

    @property
    def sigma_a(self) -> float:
        return self.norm2
