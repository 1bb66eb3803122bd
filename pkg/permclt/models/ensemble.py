"""Mergeable streaming moment accumulators."""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from permclt.core.exceptions import GridMismatchError, InsufficientDataError

INSUFFICIENT = "insufficient data"


@dataclass
class EnsembleStats:
    """
    Running means and co-moments of path values at grid times, plus
    running means and second moments of scalar functionals.

    Batches are folded in with the pairwise (Chan et al.) update, so
    merging two accumulators gives the accumulator of the concatenated
    stream up to rounding.
    """

    grid: np.ndarray
    functionals: list[str] = field(default_factory=list)
    count: int = 0
    mean: Optional[np.ndarray] = None
    comoment: Optional[np.ndarray] = None
    f_mean: Optional[np.ndarray] = None
    f_m2: Optional[np.ndarray] = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        g = len(self.grid)
        k = len(self.functionals)
        if self.mean is None:
            self.mean = np.zeros(g)
            self.comoment = np.zeros((g, g))
            self.f_mean = np.zeros(k)
            self.f_m2 = np.zeros(k)

    @classmethod
    def from_batch(
        cls,
        grid: Sequence[float],
        values: np.ndarray,
        functionals: Sequence[str] = (),
        fvalues: Optional[np.ndarray] = None,
    ) -> "EnsembleStats":
        """
        Summarize one batch directly.

        Args:
            grid: Labels of the value columns (usually evaluation times).
            values: (B, len(grid)) array of path values.
            functionals: Names of the functional columns.
            fvalues: (B, len(functionals)) array, or None when there are none.

        Returns:
            Accumulator holding the batch.
        """
        values = np.asarray(values, dtype=float)
        batch = values.shape[0]
        if fvalues is None:
            fvalues = np.zeros((batch, 0))
        fvalues = np.asarray(fvalues, dtype=float).reshape(batch, -1)
        if batch == 0:
            return cls(grid=grid, functionals=list(functionals))
        mean = values.mean(axis=0)
        centered = values - mean
        f_mean = fvalues.mean(axis=0)
        return cls(
            grid=grid,
            functionals=list(functionals),
            count=batch,
            mean=mean,
            comoment=centered.T @ centered,
            f_mean=f_mean,
            f_m2=((fvalues - f_mean) ** 2).sum(axis=0),
        )

    def update(self, values: np.ndarray, fvalues: Optional[np.ndarray] = None) -> None:
        """Fold a batch into this accumulator in place."""
        batch = EnsembleStats.from_batch(self.grid, values, self.functionals, fvalues)
        merged = self.merge(batch)
        self.count = merged.count
        self.mean = merged.mean
        self.comoment = merged.comoment
        self.f_mean = merged.f_mean
        self.f_m2 = merged.f_m2

    def merge(self, other: "EnsembleStats") -> "EnsembleStats":
        """
        Combine two accumulators.

        Args:
            other: Accumulator over the same grid and functionals.

        Returns:
            New accumulator equivalent to the concatenated streams.

        Raises:
            GridMismatchError: If grids or functional lists differ.
        """
        if self.grid.shape != other.grid.shape or not np.array_equal(self.grid, other.grid):
            raise GridMismatchError("cannot merge accumulators over different grids")
        if list(self.functionals) != list(other.functionals):
            raise GridMismatchError("cannot merge accumulators over different functionals")
        if other.count == 0:
            return self.copy()
        if self.count == 0:
            return other.copy()

        total = self.count + other.count
        weight = self.count * other.count / total
        delta = other.mean - self.mean
        f_delta = other.f_mean - self.f_mean
        return EnsembleStats(
            grid=self.grid,
            functionals=list(self.functionals),
            count=total,
            mean=self.mean + delta * (other.count / total),
            comoment=self.comoment + other.comoment + np.outer(delta, delta) * weight,
            f_mean=self.f_mean + f_delta * (other.count / total),
            f_m2=self.f_m2 + other.f_m2 + f_delta**2 * weight,
        )

    def copy(self) -> "EnsembleStats":
        return EnsembleStats(
            grid=self.grid.copy(),
            functionals=list(self.functionals),
            count=self.count,
            mean=self.mean.copy(),
            comoment=self.comoment.copy(),
            f_mean=self.f_mean.copy(),
            f_m2=self.f_m2.copy(),
        )

    def _require(self, minimum: int = 2) -> None:
        if self.count < minimum:
            raise InsufficientDataError(
                f"{INSUFFICIENT}: need at least {minimum} samples, have {self.count}"
            )

    def covariance(self) -> np.ndarray:
        """Unbiased sample covariance matrix of the grid values."""
        self._require()
        return self.comoment / (self.count - 1)

    def variance(self) -> np.ndarray:
        return np.diag(self.covariance()).copy()

    def mean_se(self) -> np.ndarray:
        """Standard errors of the grid means."""
        return np.sqrt(np.maximum(self.variance(), 0.0) / self.count)

    def covariance_se(self) -> np.ndarray:
        """
        Normal-theory standard errors of the covariance entries,
        sqrt((c_tt c_uu + c_tu^2) / (M - 1)).
        """
        cov = self.covariance()
        diag = np.diag(cov)
        return np.sqrt((np.outer(diag, diag) + cov**2) / (self.count - 1))

    def functional_variance(self) -> np.ndarray:
        self._require()
        return self.f_m2 / (self.count - 1)

    def functional_se(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.functional_variance(), 0.0) / self.count)

    def summary(self) -> dict:
        """
        JSON-ready view of the accumulator.

        Variance-type entries are ``None`` (with a note) below two samples.
        """
        out = {
            "count": self.count,
            "grid": self.grid.tolist(),
            "means": self.mean.tolist(),
            "functionals": {},
            "notes": [],
        }
        try:
            out["covariances"] = self.covariance().tolist()
            out["standard_errors"] = {
                "means": self.mean_se().tolist(),
                "covariances": self.covariance_se().tolist(),
            }
            f_se = self.functional_se().tolist()
        except InsufficientDataError as exc:
            out["covariances"] = None
            out["standard_errors"] = None
            out["notes"].append(str(exc))
            f_se = [None] * len(self.functionals)
        for name, value, se in zip(self.functionals, self.f_mean.tolist(), f_se):
            out["functionals"][name] = {"mean": value, "se": se}
        return out


@dataclass(frozen=True)
class DistanceEstimate:
    """
    |E^ g(A) - E^ g(B)| between two path sources, with its pooled standard error.

    ``ci`` is the normal-theory confidence interval for the signed
    difference's absolute value, clipped at zero.
    """

    functional: str
    estimate: float
    se: float
    ci: tuple[float, float]
    mean_a: float
    mean_b: float
    samples: int

    def as_dict(self) -> dict:
        return {
            "functional": self.functional,
            "estimate": self.estimate,
            "se": self.se,
            "ci": list(self.ci),
            "mean_a": self.mean_a,
            "mean_b": self.mean_b,
            "samples": self.samples,
        }
