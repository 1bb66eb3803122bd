"""Weak-exceedance record and tableau boundary types."""

from dataclasses import dataclass

import numpy as np

from permclt.models.path import StepPath


@dataclass(frozen=True)
class ExceedanceRecord:
    """
    Weak-exceedance statistics of one permutation.

    Attributes:
        n: Permutation size.
        permutation: 1-based images pi(1..n).
        indicators: I_i = 1{pi(i) >= i}.
        s0: Partial sums S_0(k/n), k = 0..n.
        y_hat: n^{-1/2}(S_0(t) - n mu(t)) on the grid, mu(t) = t(1 - t/2).
        rows: R_n = S_0(1).
        area: A_n, the number of (1 before 0) pairs in the indicator word.
    """

    n: int
    permutation: np.ndarray
    indicators: np.ndarray
    s0: StepPath
    y_hat: StepPath
    rows: int
    area: int


@dataclass(frozen=True)
class BoundaryPolyline:
    """
    Lower-right tableau boundary as integer lattice points.

    x runs right, y runs down; the polyline goes from (n - S_0(1), 0) to
    (0, S_0(1)) in n unit steps, step i being down iff I_i = 1.
    """

    n: int
    points: np.ndarray

    def scaled(self) -> np.ndarray:
        """Vertices divided by n."""
        return self.points / self.n


@dataclass(frozen=True)
class ExceedanceBatch:
    """
    Weak-exceedance statistics of a batch of permutations, one row each.

    ``area`` is the direct double sum and ``area_identity`` the same count
    from the partial sums; the two agree exactly.
    """

    n: int
    indicators: np.ndarray
    s0: np.ndarray
    y_hat: np.ndarray
    rows: np.ndarray
    area: np.ndarray
    area_identity: np.ndarray
