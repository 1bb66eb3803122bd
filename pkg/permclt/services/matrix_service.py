"""Score matrices: centering, normalization, Lyapounov ratio, covariance structure and paths."""

import csv
import json
import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from permclt.core.config import settings
from permclt.core.exceptions import (
    InvalidPermutationError,
    NonFiniteError,
    NonPositiveError,
    NotPSDError,
    ParseError,
    ShapeError,
    SymmetryViolationError,
    ZeroMatrixError,
)
from permclt.core.rng import LANE_MATRIX, substream
from permclt.models.path import StepPath
from permclt.models.score import Normalization, NormalizationMode, ScoreMatrix, SigmaMatrix

logger = logging.getLogger(__name__)


def _as_square(a0) -> np.ndarray:
    """
    Validate raw scores.

    Args:
        a0: Anything convertible to a 2-D float array.

    Returns:
        The scores as a float ndarray.

    Raises:
        ShapeError: If the array is not square or n < 2.
        NonFiniteError: If any entry is NaN or infinite.
    """
    arr = np.array(a0, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ShapeError(f"score matrix must be square, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise ShapeError("score matrix needs n >= 2")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("score matrix contains non-finite entries")
    return arr


def _zero_tolerance(n: int, scale: float) -> float:
    """Largest residual that centering n entries of magnitude <= scale can leave by rounding."""
    return settings.CENTERING_ULPS * n * np.finfo(float).eps * scale


def center_rows(a0) -> ScoreMatrix:
    """
    Subtract row means: a(i,j) = a0(i,j) - mean_j a0(i,j).

    Args:
        a0: n x n raw scores, n >= 2.

    Returns:
        ScoreMatrix holding a0, a and the mean vectors.

    Raises:
        ShapeError: If not square or n < 2.
        NonFiniteError: If any entry is not finite.
    """
    arr = _as_square(a0)
    n = arr.shape[0]
    row_means = arr.mean(axis=1)
    a = arr - row_means[:, None]

    return ScoreMatrix(
        n=n,
        a0=arr,
        a=a,
        row_means=row_means,
        col_means=a.mean(axis=0),
        grand_mean=float(arr.mean()),
    )


def tilde_standardize(a0) -> np.ndarray:
    """
    Double centering a0(i,j) - a0(+,j) - a0(i,+) + a0(+,+).

    Args:
        a0: n x n raw scores.

    Returns:
        Matrix whose row and column sums all vanish.
    """
    arr = _as_square(a0)
    return (
        arr
        - arr.mean(axis=0)[None, :]
        - arr.mean(axis=1)[:, None]
        + arr.mean()
    )


def custom_normalization(s: Optional[float]) -> Normalization:
    """
    Normalization with a caller-chosen scale.

    Raises:
        NonPositiveError: If s is missing, not finite or not positive.
    """
    if s is None or not np.isfinite(s) or s <= 0:
        raise NonPositiveError(f"custom normalization needs s > 0, got {s}")
    return Normalization(mode=NormalizationMode.CUSTOM, s=float(s))


def normalization(
    m: ScoreMatrix,
    mode: Union[NormalizationMode, str] = NormalizationMode.CANONICAL,
    s: Optional[float] = None,
) -> Normalization:
    """
    Choose the scale factor s(a).

    Args:
        m: Centered score matrix.
        mode: canonical (s^2 = sum a^2/(n-1)), tilde (same on the doubly
            centered matrix), simple (sum a^2/n) or custom.
        s: The value to use in custom mode.

    Returns:
        Normalization with s > 0.

    Raises:
        ZeroMatrixError: If the relevant sum of squares vanishes.
        NonPositiveError: If a custom s is missing or not positive.
    """
    mode = NormalizationMode(mode)
    if mode is NormalizationMode.CUSTOM:
        return custom_normalization(s)

    base = tilde_standardize(m.a0) if mode is NormalizationMode.TILDE else m.a
    if float(np.max(np.abs(base))) <= _zero_tolerance(m.n, m.scale):
        label = "tilde-standardized" if mode is NormalizationMode.TILDE else "centered"
        raise ZeroMatrixError(f"{label} matrix is identically zero; s({mode.value}) is undefined")

    denom = m.n if mode is NormalizationMode.SIMPLE else m.n - 1
    return Normalization(mode=mode, s=float(np.sqrt(np.sum(base * base) / denom)))


def lyapounov_ratio(m: ScoreMatrix, norm: Normalization) -> float:
    """
    Lambda(a) = (n s^3)^{-1} sum |a(i,j)|^3.

    Args:
        m: Centered score matrix.
        norm: Normalization with s > 0.

    Returns:
        The Lyapounov ratio.
    """
    return float(np.sum(np.abs(m.a) ** 3) / (m.n * norm.s**3))


def lyapounov_tilde(m: ScoreMatrix) -> float:
    """
    Lambda~(a), the same ratio computed from the doubly centered matrix
    and its own scale s~.

    Raises:
        ZeroMatrixError: If the doubly centered matrix vanishes.
    """
    tilde = tilde_standardize(m.a0)
    s_tilde = normalization(m, NormalizationMode.TILDE).s
    return float(np.sum(np.abs(tilde) ** 3) / (m.n * s_tilde**3))


def sigma_matrix(m: ScoreMatrix, norm: Normalization) -> SigmaMatrix:
    """
    Increment covariances sigma_ij = a_i . a_j (delta_ij - 1/n) / ((n-1) s^2).

    On the diagonal this is sum_l a^2(i,l) / (n s^2); off the diagonal it is
    -sum_l a(i,l) a(j,l) / (n (n-1) s^2).

    Args:
        m: Centered score matrix.
        norm: Normalization.

    Returns:
        Symmetric positive semidefinite SigmaMatrix.

    Raises:
        SymmetryViolationError: If the result is not symmetric (never for
            finite input).
        NotPSDError: If an eigenvalue is below the PSD tolerance.
    """
    n = m.n
    gram = m.a @ m.a.T
    sigma = -gram / (n * (n - 1) * norm.s2)
    np.fill_diagonal(sigma, np.diag(gram) / (n * norm.s2))

    scale = max(float(np.max(np.abs(sigma))), np.finfo(float).tiny)
    if np.max(np.abs(sigma - sigma.T)) > settings.SYMMETRY_TOL * scale:
        raise SymmetryViolationError("sigma matrix is not symmetric")
    if n <= 2000:
        lowest = float(np.linalg.eigvalsh(sigma)[0])
        if lowest < -settings.PSD_TOL * scale:
            raise NotPSDError(f"sigma matrix has eigenvalue {lowest:.3e}")
    return SigmaMatrix(n=n, sigma=sigma)


def empirical_fn_gn(m: ScoreMatrix, norm: Normalization) -> tuple[np.ndarray, np.ndarray]:
    """
    f_n and g_n on the grid k/n.

    f_n(t) = (n s^2)^{-1} sum_{i<=nt} sum_l a^2(i,l),
    g_n(t,u) = (n s)^{-2} sum_{i<=nt} sum_{j<=nu} sum_l a(i,l) a(j,l).

    Args:
        m: Centered score matrix.
        norm: Normalization.

    Returns:
        (fn, gn) with fn of length n+1 and gn of shape (n+1, n+1), index k
        standing for t = k/n.
    """
    n = m.n
    row_sq = np.sum(m.a * m.a, axis=1)
    fn = np.concatenate(([0.0], np.cumsum(row_sq))) / (n * norm.s2)

    partial = np.zeros((n + 1, n))
    partial[1:] = np.cumsum(m.a, axis=0)
    gn = partial @ partial.T / (n * norm.s) ** 2
    return fn, gn


def prelimit_covariance(m: ScoreMatrix, norm: Normalization) -> np.ndarray:
    """
    Cov(Z_n(k/n), Z_n(l/n)) = n/(n-1) (f_n(t ^ u) - g_n(t,u)) on the k/n grid.
    """
    n = m.n
    fn, gn = empirical_fn_gn(m, norm)
    idx = np.arange(n + 1)
    return n / (n - 1) * (fn[np.minimum.outer(idx, idx)] - gn)


def validate_permutation(perm: Sequence[int], n: int, one_based: bool = True) -> np.ndarray:
    """
    Check that ``perm`` is a bijection and return it 0-based.

    Args:
        perm: Images pi(1..n).
        n: Expected size.
        one_based: Whether the images are in {1..n} (else {0..n-1}).

    Returns:
        0-based integer array.

    Raises:
        InvalidPermutationError: If perm is not a bijection of the right size.
    """
    arr = np.asarray(perm)
    if arr.shape != (n,) or not np.issubdtype(arr.dtype, np.integer):
        raise InvalidPermutationError(f"expected {n} integer images, got {arr!r}")
    zero_based = arr - 1 if one_based else arr
    if not np.array_equal(np.sort(zero_based), np.arange(n)):
        raise InvalidPermutationError(f"not a permutation of 1..{n}: {arr.tolist()}")
    return zero_based


def build_paths(m: ScoreMatrix, norm: Normalization, perms: np.ndarray) -> np.ndarray:
    """
    Vectorized Y(pi) for a batch of 0-based permutations.

    Args:
        m: Centered score matrix.
        norm: Normalization.
        perms: (B, n) array of 0-based permutations.

    Returns:
        (B, n+1) array of path values on the k/n grid.
    """
    perms = np.asarray(perms)
    picked = m.a[np.arange(m.n)[None, :], perms] / norm.s
    out = np.zeros((perms.shape[0], m.n + 1))
    np.cumsum(picked, axis=1, out=out[:, 1:])
    return out


def build_path(m: ScoreMatrix, norm: Normalization, perm: Sequence[int]) -> StepPath:
    """
    Y(t) = s^{-1} sum_{i <= nt} a(i, pi(i)).

    Args:
        m: Centered score matrix.
        norm: Normalization.
        perm: 1-based permutation images pi(1..n).

    Returns:
        The step path Y(pi).

    Raises:
        InvalidPermutationError: If perm is not a permutation of 1..n.
    """
    zero_based = validate_permutation(perm, m.n)
    return StepPath(n=m.n, values=build_paths(m, norm, zero_based[None, :])[0])


def generate_family(spec: str) -> np.ndarray:
    """
    Raw scores for a built-in family.

    Supported specs: ``exceedance:n``, ``uniform:n:seed``,
    ``bernoulli:n:p:seed`` and ``additive:n:seed`` (b(i) + c(j)).

    Args:
        spec: Family spec string.

    Returns:
        n x n raw score matrix.

    Raises:
        ParseError: If the spec is malformed or names an unknown family.
    """
    parts = spec.split(":")
    name, args = parts[0], parts[1:]
    expected = {"exceedance": 1, "uniform": 2, "bernoulli": 3, "additive": 2}
    if name not in expected:
        raise ParseError(f"unknown matrix family '{name}'", source=spec)
    if len(args) != expected[name]:
        raise ParseError(f"family '{name}' takes {expected[name]} arguments", source=spec)
    try:
        n = int(args[0])
        if name == "exceedance":
            return np.triu(np.ones((n, n)))
        if name == "bernoulli":
            prob, seed = float(args[1]), int(args[2])
        else:
            seed = int(args[1])
    except ValueError as exc:
        raise ParseError(f"bad numeric argument ({exc})", source=spec) from exc

    rng = substream(seed, 0, LANE_MATRIX)
    if name == "uniform":
        return rng.uniform(size=(n, n))
    if name == "bernoulli":
        if not 0.0 <= prob <= 1.0:
            raise ParseError(f"bernoulli p must lie in [0,1], got {prob}", source=spec)
        return (rng.uniform(size=(n, n)) < prob).astype(float)
    b = rng.normal(size=n)
    c = rng.normal(size=n)
    return b[:, None] + c[None, :]


def load_matrix(path: Union[str, Path]) -> np.ndarray:
    """
    Read raw scores from CSV (n rows of n reals) or JSON {"n":..., "a0":[[...]]}.

    Args:
        path: File to read.

    Returns:
        n x n raw score matrix.

    Raises:
        ParseError: With file name and line number on malformed input.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read file ({exc.strerror})", source=str(path)) from exc

    if path.suffix.lower() == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, source=str(path), line=exc.lineno) from exc
        if not isinstance(doc, dict) or "a0" not in doc:
            raise ParseError("JSON matrix needs an 'a0' field", source=str(path))
        try:
            a0 = np.array(doc["a0"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"'a0' is not a numeric matrix ({exc})", source=str(path)) from exc
        if "n" in doc and (a0.ndim != 2 or doc["n"] != a0.shape[0]):
            raise ParseError(f"declared n={doc['n']} does not match a0", source=str(path))
        return a0

    rows: list[list[float]] = []
    for lineno, record in enumerate(csv.reader(text.splitlines()), start=1):
        if not record or all(not cell.strip() for cell in record):
            continue
        try:
            rows.append([float(cell) for cell in record])
        except ValueError as exc:
            raise ParseError(f"row {lineno}: {exc}", source=str(path), line=lineno) from exc
        if len(rows[-1]) != len(rows[0]):
            raise ParseError(
                f"row {lineno} has {len(rows[-1])} entries, expected {len(rows[0])}",
                source=str(path),
                line=lineno,
            )
    if not rows:
        raise ParseError("empty matrix file", source=str(path))
    logger.debug("Loaded %dx%d matrix from %s", len(rows), len(rows[0]), path)
    return np.array(rows)


def resolve_matrix(family: Optional[str] = None, input_path: Optional[str] = None) -> ScoreMatrix:
    """
    Load or generate raw scores and center them.

    Args:
        family: Built-in family spec.
        input_path: CSV or JSON file.

    Returns:
        Centered ScoreMatrix.

    Raises:
        ParseError: If neither or both sources are given, or parsing fails.
    """
    if (family is None) == (input_path is None):
        raise ParseError("give exactly one of a family spec or an input file")
    a0 = generate_family(family) if family is not None else load_matrix(input_path)
    return center_rows(a0)


def expand_family(family: str, n: Optional[int] = None, seed: int = 0, p: float = 0.5) -> str:
    """
    Complete a bare family name into a full spec, e.g. ``exceedance`` with
    n=100 -> ``exceedance:100``; full specs pass through unchanged.

    Raises:
        ParseError: If a bare name is given without n.
    """
    if ":" in family:
        return family
    if n is None:
        raise ParseError(f"family '{family}' needs --n", source=family)
    if family == "bernoulli":
        return f"bernoulli:{n}:{p}:{seed}"
    if family in ("uniform", "additive"):
        return f"{family}:{n}:{seed}"
    return f"{family}:{n}"
