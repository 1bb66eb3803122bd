"""Weak exceedances of permutations: exact moments, the centered process, boundary and area."""

import logging
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from permclt.core.exceptions import IndexOrderError, RangeError, ShapeError
from permclt.models.path import StepPath
from permclt.models.score import ScoreMatrix
from permclt.models.tableau import BoundaryPolyline, ExceedanceBatch, ExceedanceRecord
from permclt.services import matrix_service

logger = logging.getLogger(__name__)

# Entries per row block when streaming the doubly centered matrix.
_TILDE_BLOCK = 1 << 22


# --------------------------------------------------------------------------
# Score matrix and limit kernel
# --------------------------------------------------------------------------


def exceedance_matrix(n: int) -> ScoreMatrix:
    """
    a0(i,j) = 1{i <= j}, centered to a(i,j) = 1{i <= j} - 1 + (i-1)/n.

    Raises:
        ShapeError: If n < 2.
    """
    return matrix_service.center_rows(np.triu(np.ones((n, n))))


def exceedance_sums(n: int) -> tuple[float, float]:
    """
    (sum a^2, sum |a|^3) of the centered exceedance matrix without building it.

    Row i holds n-i+1 entries equal to (i-1)/n and i-1 entries equal to
    (i-1)/n - 1.
    """
    i = np.arange(1, n + 1, dtype=float)
    v = (i - 1) / n
    above = n - i + 1
    below = i - 1
    sum_sq = np.sum(above * v**2 + below * (1 - v) ** 2)
    sum_cube = np.sum(above * v**3 + below * (1 - v) ** 3)
    return float(sum_sq), float(sum_cube)


def exceedance_tilde_sums(n: int) -> tuple[float, float]:
    """
    (sum a~^2, sum |a~|^3) of the doubly centered exceedance matrix, built
    a block of rows at a time.

    a~(i,j) = 1{i <= j} - (n-i+1)/n - j/n + (n+1)/(2n).
    """
    j = np.arange(1, n + 1, dtype=float)
    col = j / n
    grand = (n + 1) / (2.0 * n)
    step = max(1, _TILDE_BLOCK // n)
    sum_sq = sum_cube = 0.0
    for start in range(1, n + 1, step):
        i = np.arange(start, min(n, start + step - 1) + 1, dtype=float)
        block = (i[:, None] <= j[None, :]) - ((n - i + 1) / n)[:, None] - col[None, :] + grand
        sq = block * block
        sum_sq += float(sq.sum())
        sum_cube += float((sq * np.abs(block)).sum())
    return sum_sq, sum_cube


def lyapounov_scaled(n: int) -> float:
    """Lambda(a) sqrt(n) for the exceedance family with canonical s."""
    sum_sq, sum_cube = exceedance_sums(n)
    s = np.sqrt(sum_sq / (n - 1))
    return float(sum_cube / (n * s**3) * np.sqrt(n))


def limit_f(t):
    """f(t) = 3t^2 - 2t^3."""
    t = np.asarray(t, dtype=float)
    return 3.0 * t**2 - 2.0 * t**3


def limit_g(t, u):
    """g(t,u) = 3t^2 u - t^3 - (3/2) t^2 u^2 for t <= u, extended symmetrically."""
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    lo, hi = np.minimum(t, u), np.maximum(t, u)
    return 3.0 * lo**2 * hi - lo**3 - 1.5 * lo**2 * hi**2


def _check_unit(*points) -> None:
    for x in points:
        arr = np.asarray(x, dtype=float)
        if np.any(arr < 0.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
            raise RangeError(f"time {x} lies outside [0, 1]")


def limit_cov_hat(t, u):
    """
    Limit covariance of the centered exceedance process,
    sigma^(t,u) = t^2 (1 - u + u^2/2)/2 - t^3/6 for t <= u (symmetric otherwise).

    Raises:
        RangeError: If t or u lies outside [0, 1].
    """
    _check_unit(t, u)
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    lo, hi = np.minimum(t, u), np.maximum(t, u)
    out = 0.5 * lo**2 * (1.0 - hi + 0.5 * hi**2) - lo**3 / 6.0
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# Per-permutation statistics
# --------------------------------------------------------------------------


def _mu(t):
    return t * (1.0 - t / 2.0)


def _area_direct(indicators: np.ndarray) -> np.ndarray:
    """sum_i I_i sum_{j>i} (1 - I_j), row by row."""
    zeros = 1 - indicators
    zeros_after = zeros.sum(axis=1, keepdims=True) - np.cumsum(zeros, axis=1)
    return np.sum(indicators * zeros_after, axis=1)


def _area_identity(s0: np.ndarray) -> np.ndarray:
    """sum_i S_0(i/n) - S_0(1)^2/2 - S_0(1)/2, in integers."""
    rows = s0[:, -1]
    return (2 * s0[:, 1:].sum(axis=1) - rows * rows - rows) // 2


def exceedance_batch(perms: np.ndarray) -> ExceedanceBatch:
    """
    Statistics of a batch of permutations.

    Args:
        perms: (B, n) array of 0-based permutations.

    Returns:
        ExceedanceBatch with integer S_0, R_n and both area counts.
    """
    perms = np.asarray(perms)
    n = perms.shape[1]
    indicators = (perms >= np.arange(n)[None, :]).astype(np.int64)
    s0 = np.zeros((perms.shape[0], n + 1), dtype=np.int64)
    np.cumsum(indicators, axis=1, out=s0[:, 1:])
    t = np.arange(n + 1) / n
    y_hat = (s0 - n * _mu(t)[None, :]) / np.sqrt(n)
    return ExceedanceBatch(
        n=n,
        indicators=indicators,
        s0=s0,
        y_hat=y_hat,
        rows=s0[:, -1].copy(),
        area=_area_direct(indicators),
        area_identity=_area_identity(s0),
    )


def exceedance_record(perm: Sequence[int]) -> ExceedanceRecord:
    """
    Weak-exceedance record of a single permutation.

    Args:
        perm: 1-based permutation pi(1..n).

    Returns:
        ExceedanceRecord.

    Raises:
        InvalidPermutationError: If perm is not a permutation of 1..n.
    """
    n = len(perm)
    zero_based = matrix_service.validate_permutation(perm, n)
    batch = exceedance_batch(zero_based[None, :])
    if batch.area[0] != batch.area_identity[0]:
        raise AssertionError("area counts disagree")
    return ExceedanceRecord(
        n=n,
        permutation=zero_based + 1,
        indicators=batch.indicators[0],
        s0=StepPath(n=n, values=batch.s0[0].astype(float)),
        y_hat=StepPath(n=n, values=batch.y_hat[0]),
        rows=int(batch.rows[0]),
        area=int(batch.area[0]),
    )


# --------------------------------------------------------------------------
# Exact moments
# --------------------------------------------------------------------------


def _check_index(n: int, *indices: int) -> None:
    for i in indices:
        if not 1 <= i <= n:
            raise RangeError(f"index {i} outside 1..{n}")


def mean_indicator(n: int, i: int) -> Fraction:
    """E I_i = (n-i+1)/n."""
    _check_index(n, i)
    return Fraction(n - i + 1, n)


def joint_indicator(n: int, i: int, j: int) -> Fraction:
    """
    E I_i I_j = (n-i)(n-j+1)/((n-1)n) for i < j.

    Raises:
        IndexOrderError: If i >= j.
    """
    if i >= j:
        raise IndexOrderError(f"joint moment needs i < j, got i={i}, j={j}")
    _check_index(n, i, j)
    return Fraction((n - i) * (n - j + 1), (n - 1) * n)


def conditional_indicator(n: int, i: int, j: int) -> Fraction:
    """E{I_i | I_j = 1} = (n-i)/(n-1) for i < j."""
    return joint_indicator(n, i, j) / mean_indicator(n, j)


def mean_s0(n: int, k: int) -> Fraction:
    """E S_0(k/n) = k(2n-k+1)/(2n)."""
    if not 0 <= k <= n:
        raise RangeError(f"k={k} outside 0..{n}")
    return Fraction(k * (2 * n - k + 1), 2 * n)


def exact_moments(n: int, i: int, j: int, k: int) -> dict[str, Fraction]:
    """
    Closed-form first and second moments of the exceedance indicators.

    Args:
        n: Permutation size (>= 2).
        i: First index, 1 <= i < j.
        j: Second index, <= n.
        k: Partial-sum index, 0 <= k <= n.

    Returns:
        Mapping with keys ``E[I_i]``, ``E[I_i I_j]``, ``E[I_i | I_j=1]``
        and ``E[S_0(k/n)]``.

    Raises:
        IndexOrderError: If i >= j.
        RangeError: If an index is out of range.
    """
    return {
        "E[I_i]": mean_indicator(n, i),
        "E[I_i I_j]": joint_indicator(n, i, j),
        "E[I_i | I_j=1]": conditional_indicator(n, i, j),
        "E[S_0(k/n)]": mean_s0(n, k),
    }


def _second_moment_rows(n: int) -> Fraction:
    """E S_0(1)^2 by the joint-moment formula, summed in O(n)."""
    pairs = 0
    tail = 0
    # tail holds sum_{i<j} (n-i) while j advances
    for j in range(2, n + 1):
        tail += n - (j - 1)
        pairs += tail * (n - j + 1)
    first = sum(n - i + 1 for i in range(1, n + 1))
    return Fraction(first, n) + 2 * Fraction(pairs, (n - 1) * n)


def exact_row_variance(n: int) -> Fraction:
    """Var R_n, exactly."""
    mean = Fraction(n + 1, 2)
    return _second_moment_rows(n) - mean * mean


def exact_area_mean(n: int) -> Fraction:
    """E A_n = sum_i E S_0(i/n) - E S_0(1)^2/2 - E S_0(1)/2, exactly."""
    partial = sum(mean_s0(n, k) for k in range(1, n + 1))
    return partial - _second_moment_rows(n) / 2 - Fraction(n + 1, 4)


# --------------------------------------------------------------------------
# Tableau boundary
# --------------------------------------------------------------------------


def boundary_from_s0(s0: Sequence[int]) -> BoundaryPolyline:
    """Vertices (n - S_0(1) - l + S_0(l), S_0(l)), l = 0..n, as integers."""
    s0 = np.rint(np.asarray(s0, dtype=float)).astype(np.int64)
    n = s0.size - 1
    l = np.arange(n + 1)
    return BoundaryPolyline(n=n, points=np.column_stack((n - s0[-1] - l + s0, s0)))


def boundary(record: ExceedanceRecord) -> BoundaryPolyline:
    """Lower-right boundary of the tableau of one permutation."""
    return boundary_from_s0(record.s0.values)


def parabola_point(t):
    """Point of the limit arc x = (1-t^2)/2, y = (1-(1-t)^2)/2."""
    t = np.asarray(t, dtype=float)
    return 0.5 * (1.0 - t**2), 0.5 * (1.0 - (1.0 - t) ** 2)


def parabola_distance(poly: BoundaryPolyline) -> float:
    """
    Sup over scaled vertices of the distance to the arc x + y = 3/4 - (x-y)^2,
    measured along the coordinate directions (the smaller of the two).

    A coordinate outside [0, 1/2] is clamped to the arc's range and the
    excess added to that direction's distance.
    """
    pts = poly.scaled()
    x, y = pts[:, 0], pts[:, 1]

    yc = np.clip(y, 0.0, 0.5)
    t_from_y = 1.0 - np.sqrt(1.0 - 2.0 * yc)
    horizontal = np.abs(x - 0.5 * (1.0 - t_from_y**2)) + np.abs(y - yc)

    xc = np.clip(x, 0.0, 0.5)
    t_from_x = np.sqrt(1.0 - 2.0 * xc)
    vertical = np.abs(y - 0.5 * (1.0 - (1.0 - t_from_x) ** 2)) + np.abs(x - xc)

    return float(np.max(np.minimum(horizontal, vertical)))


def boundary_approximation(record: ExceedanceRecord) -> np.ndarray:
    """
    The curve (x(t) + n^{-1/2}(Y^(t) - Y^(1)), y(t) + n^{-1/2} Y^(t)) at t = l/n,
    where (x(t), y(t)) is the limit arc.

    Returns:
        (n+1, 2) array, comparable with ``boundary(record).scaled()``.
    """
    n = record.n
    t = np.arange(n + 1) / n
    x, y = parabola_point(t)
    y_hat = record.y_hat.values
    scale = 1.0 / np.sqrt(n)
    return np.column_stack((x + scale * (y_hat - y_hat[-1]), y + scale * y_hat))


# --------------------------------------------------------------------------
# Area and row statistics
# --------------------------------------------------------------------------


def area_from_centered(n: int, y_hat: np.ndarray) -> np.ndarray:
    """
    A_n rebuilt from the centered process:
    (5n^2 - 2)/24 + n^{3/2}(n^{-1} sum_i Y^(i/n) - Y^(1)/2) - (sqrt(n) Y^(1) + n Y^(1)^2)/2.

    Args:
        n: Permutation size.
        y_hat: (..., n+1) values of Y^ on the k/n grid.
    """
    y_hat = np.asarray(y_hat, dtype=float)
    last = y_hat[..., -1]
    return (
        (5.0 * n * n - 2.0) / 24.0
        + n**1.5 * (y_hat[..., 1:].mean(axis=-1) - 0.5 * last)
        - 0.5 * (np.sqrt(n) * last + n * last * last)
    )


def yn_deviation(n: int, perm: Sequence[int]) -> float:
    """
    sup_k |Y_n(k/n) - sqrt(6/n)(S_0(k/n) - n mu(k/n))| for the exceedance
    matrix with canonical s; O(n^{-1/2}).

    Uses Y_n(k/n) = (S_0(k/n) - k + k(k-1)/(2n)) / s, so no n x n matrix is built.

    Raises:
        ShapeError: If n < 2.
        InvalidPermutationError: If perm is not a permutation of 1..n.
    """
    if n < 2:
        raise ShapeError(f"exceedance matrix needs n >= 2, got {n}")
    matrix_service.validate_permutation(perm, n)
    record = exceedance_record(perm)
    sum_sq, _ = exceedance_sums(n)
    s = np.sqrt(sum_sq / (n - 1))
    k = np.arange(n + 1, dtype=float)
    s0 = record.s0.values
    path = (s0 - k + k * (k - 1) / (2.0 * n)) / s
    approx = np.sqrt(6.0 / n) * (s0 - n * _mu(k / n))
    return float(np.max(np.abs(path - approx)))


def area_limit_variance() -> float:
    """
    Limit variance of n^{-3/2}(A_n - 5n^2/24):
    the double integral of sigma^ minus the integral of sigma^(t,1) plus sigma^(1,1)/4,
    integrated in closed form. Equals 1/144.
    """
    # integral over t < u of t^2(1-u+u^2/2)/2 - t^3/6, first in t then in u
    triangle = Fraction(1, 24) - Fraction(1, 30) + Fraction(1, 72) - Fraction(1, 120)
    square = 2 * triangle
    edge = Fraction(1, 12) - Fraction(1, 24)
    corner = Fraction(1, 12)
    return float(square - edge + corner / 4)


def area_functional(kernel: Callable[[float, float], float]) -> float:
    """
    The same functional for an arbitrary kernel, by adaptive quadrature.

    The square is split along the diagonal, where sigma^-type kernels kink.
    """
    lower, _ = integrate.dblquad(lambda u, t: kernel(t, u), 0.0, 1.0, lambda t: 0.0, lambda t: t, epsabs=1e-12)
    upper, _ = integrate.dblquad(lambda u, t: kernel(t, u), 0.0, 1.0, lambda t: t, lambda t: 1.0, epsabs=1e-12)
    edge, _ = integrate.quad(lambda t: kernel(t, 1.0), 0.0, 1.0, epsabs=1e-13)
    return lower + upper - edge + 0.25 * kernel(1.0, 1.0)


def area_variance_scaled(areas: np.ndarray, n: int) -> float:
    """n^{-3} Var(A_n) from a sample of areas."""
    return float(np.var(np.asarray(areas, dtype=float), ddof=1) / float(n) ** 3)


def rows_variance_scaled(rows: np.ndarray, n: int) -> float:
    """n^{-1} Var(R_n) from a sample of row counts."""
    return float(np.var(np.asarray(rows, dtype=float), ddof=1) / n)


def mean_deviation(n: int, times: Optional[Sequence[float]] = None) -> float:
    """
    max over t of |E S_0(floor(nt)/n) - n mu(t)|, from the exact means.

    Args:
        n: Permutation size.
        times: Evaluation times; all k/n and midpoints by default.
    """
    if times is None:
        times = np.arange(2 * n + 1) / (2 * n)
    times = np.asarray(times, dtype=float)
    k = np.minimum(np.floor(n * times + 1e-9), n)
    exact = k * (2 * n - k + 1) / (2 * n)
    return float(np.max(np.abs(exact - n * _mu(times))))
