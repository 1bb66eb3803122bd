"""Reproducible Monte Carlo and exact-enumeration engine."""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Iterator, Optional, Protocol, Sequence, TypeVar, Union

import numpy as np
from scipy import special, stats

from permclt.core.config import settings
from permclt.core.exceptions import (
    DegenerateSampleError,
    GridMismatchError,
    InsufficientDataError,
    NonPositiveError,
    RangeError,
    TooLargeError,
)
from permclt.core.rng import LANE_PATHS, substream
from permclt.models.ensemble import DistanceEstimate, EnsembleStats
from permclt.models.functional import PathFunctional
from permclt.models.kernel import AlphaFamily, Factorization, LimitKernel, PreLimitModel
from permclt.models.path import grid_index
from permclt.models.score import Normalization, NormalizationMode, ScoreMatrix
from permclt.schemas.run import RunConfig
from permclt.services import functional_service, gaussian_service, matrix_service, tableau_service

logger = logging.getLogger(__name__)

T = TypeVar("T")

# Keys that legitimately differ between otherwise identical runs.
VOLATILE_KEYS = frozenset({"timestamp", "workers"})


# --------------------------------------------------------------------------
# Permutations
# --------------------------------------------------------------------------


def random_permutation(n: int, rng: np.random.Generator) -> np.ndarray:
    """
    Uniform random permutation of 1..n (Fisher-Yates on the given stream).

    Raises:
        RangeError: If n < 1.
    """
    if n < 1:
        raise RangeError(f"n must be >= 1, got {n}")
    return rng.permutation(n) + 1


def random_permutations(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """(size, n) array of independent uniform 0-based permutations."""
    return rng.permuted(np.tile(np.arange(n), (size, 1)), axis=1)


def enumerate_permutations(n: int) -> Iterator[tuple[int, ...]]:
    """
    Every permutation of 1..n exactly once, in lexicographic order.

    Raises:
        TooLargeError: If n exceeds the enumeration limit.
    """
    if n > settings.ENUMERATION_LIMIT:
        raise TooLargeError(f"enumeration is limited to n <= {settings.ENUMERATION_LIMIT}, got {n}")
    return itertools.permutations(range(1, n + 1))


def permutation_table(n: int) -> np.ndarray:
    """All n! permutations as a (n!, n) array of 0-based images."""
    return np.array(list(enumerate_permutations(n)), dtype=np.int64).reshape(-1, n) - 1


# --------------------------------------------------------------------------
# Path sources
# --------------------------------------------------------------------------


class PathSource(Protocol):
    """Anything that draws batches of step paths on the k/n grid."""

    name: str
    n: int

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray: ...

    def warm(self) -> None: ...


class PermutationSource:
    """Y(pi) for uniform random permutations pi."""

    def __init__(self, m: ScoreMatrix, norm: Normalization):
        self.name = "y"
        self.n = m.n
        self.m = m
        self.norm = norm

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return matrix_service.build_paths(self.m, self.norm, random_permutations(self.n, size, rng))

    def warm(self) -> None:
        pass


class PrelimitSource:
    """
    Pre-limit Gaussian process Z_n.

    ``method="exact"`` uses the n^2-normal construction; ``"factorized"``
    draws through a symmetric factor of sigma, computed once here.
    """

    def __init__(self, model: PreLimitModel, method: str = "exact"):
        self.name = f"prelimit-{method}"
        self.n = model.n
        self.model = model
        self.method = method
        self.factor: Optional[Factorization] = None
        if method == "factorized":
            self.factor = gaussian_service.factorize(model.sigma.sigma)
        elif method != "exact":
            raise RangeError(f"unknown pre-limit method '{method}'")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.factor is not None:
            return gaussian_service.sample_prelimit_factorized(self.factor, rng, size)
        return gaussian_service.sample_prelimit_batch(self.model, rng, size)

    def warm(self) -> None:
        pass


class LimitSource:
    """Limit process with a given kernel, sampled on k/n."""

    def __init__(self, kernel: LimitKernel, n: int):
        self.name = f"limit-{kernel.name}"
        self.n = n
        self.kernel = kernel
        self.grid = np.arange(n + 1) / n

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return gaussian_service.sample_limit_batch(self.kernel, self.grid, rng, size)

    def warm(self) -> None:
        gaussian_service.kernel_factor(self.kernel, self.grid)


class IntegralSource:
    """Limit process through its stochastic-integral representation."""

    def __init__(self, fam: AlphaFamily, n: int, refine: int = 4):
        self.name = f"integral-{fam.name}"
        self.n = n
        self.fam = fam
        self.refine = refine

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return gaussian_service.sample_limit_integral_batch(self.fam, self.n, rng, size, self.refine)

    def warm(self) -> None:
        pass


class TableauSource:
    """Centered weak-exceedance process Y^_n of uniform permutations."""

    def __init__(self, n: int):
        self.name = "tableau"
        self.n = n

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return tableau_service.exceedance_batch(random_permutations(self.n, size, rng)).y_hat

    def warm(self) -> None:
        pass


def build_source(cfg: RunConfig) -> PathSource:
    """
    Construct the path source a run config names.

    Raises:
        PermCLTError: Whatever loading the matrix, kernel or family raises.
    """
    if cfg.source == "tableau":
        return TableauSource(cfg.n)
    if cfg.source == "limit":
        return LimitSource(gaussian_service.parse_kernel(cfg.kernel), cfg.n)
    if cfg.source == "integral":
        return IntegralSource(gaussian_service.parse_alpha_family(cfg.alpha, cfg.n), cfg.n, cfg.refine)

    m = matrix_service.resolve_matrix(cfg.family, cfg.input_path)
    norm = matrix_service.normalization(m, cfg.mode)
    if cfg.source == "prelimit":
        return PrelimitSource(gaussian_service.prelimit_model(m, norm), cfg.prelimit_method)
    return PermutationSource(m, norm)


# --------------------------------------------------------------------------
# Chunked, parallel, order-preserving execution
# --------------------------------------------------------------------------


def chunk_sizes(samples: int) -> list[int]:
    """Sizes of the fixed-size chunks covering ``samples`` draws."""
    full, rest = divmod(samples, settings.CHUNK_SIZE)
    return [settings.CHUNK_SIZE] * full + ([rest] if rest else [])


def map_chunks(
    samples: int,
    seed: int,
    workers: int,
    fn: Callable[[np.random.Generator, int], T],
    lane: int = LANE_PATHS,
) -> list[T]:
    """
    Run ``fn(rng, size)`` over every chunk and return results in chunk order.

    Chunk k always draws from ``substream(seed, k, lane)``, so the returned
    list does not depend on ``workers``.

    Args:
        samples: Total number of draws.
        seed: Root seed.
        workers: Thread count.
        fn: Per-chunk job.
        lane: Substream lane.

    Returns:
        One result per chunk.
    """
    sizes = chunk_sizes(samples)

    def job(index: int) -> T:
        return fn(substream(seed, index, lane), sizes[index])

    if workers <= 1 or len(sizes) <= 1:
        return [job(i) for i in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, range(len(sizes))))


def run_ensemble(
    cfg: RunConfig,
    source: Optional[PathSource] = None,
    functionals: Optional[Sequence[PathFunctional]] = None,
) -> EnsembleStats:
    """
    Streaming statistics of path values and functionals over cfg.samples draws.

    Args:
        cfg: Run configuration (samples, seed, workers, grid, functionals).
        source: Path source; built from cfg when omitted.
        functionals: Parsed functionals; parsed from cfg.functionals when omitted.

    Returns:
        EnsembleStats over the grid times, merged in chunk order.
    """
    source = source or build_source(cfg)
    if functionals is None:
        functionals = [functional_service.parse_functional(spec) for spec in cfg.functionals]
    names = [f.name for f in functionals]
    index = grid_index(source.n, cfg.grid)
    source.warm()

    def chunk(rng: np.random.Generator, size: int) -> tuple[np.ndarray, Optional[np.ndarray]]:
        paths = source.sample(rng, size)
        fvalues = np.column_stack(
            [functional_service.evaluate_batch(f, paths, source.n) for f in functionals]
        ) if functionals else None
        return paths[:, index], fvalues

    logger.info(
        "Running %s ensemble: n=%d samples=%d workers=%d", source.name, source.n, cfg.samples, cfg.workers
    )
    total = EnsembleStats(grid=cfg.grid, functionals=names)
    for values, fvalues in map_chunks(cfg.samples, cfg.seed, cfg.workers, chunk):
        total.update(values, fvalues)
    logger.info("Finished %s ensemble with %d samples", source.name, total.count)
    return total


def distance_estimate(
    cfg: RunConfig,
    g: Union[str, PathFunctional],
    source_a: PathSource,
    source_b: PathSource,
) -> DistanceEstimate:
    """
    |E^ g(A) - E^ g(B)| with pooled standard error and a 95% interval.

    Both ensembles use the same seed, so identical sources give exactly 0.

    Raises:
        GridMismatchError: If the sources live on different grids.
    """
    if source_a.n != source_b.n:
        raise GridMismatchError(f"sources have n={source_a.n} and n={source_b.n}")
    functional = functional_service.parse_functional(g) if isinstance(g, str) else g
    ens_a = run_ensemble(cfg, source_a, [functional])
    ens_b = run_ensemble(cfg, source_b, [functional])
    mean_a, mean_b = float(ens_a.f_mean[0]), float(ens_b.f_mean[0])
    se = float(np.hypot(ens_a.functional_se()[0], ens_b.functional_se()[0]))
    estimate = abs(mean_a - mean_b)
    z = float(stats.norm.ppf(0.975))
    return DistanceEstimate(
        functional=functional.name,
        estimate=estimate,
        se=se,
        ci=(max(0.0, estimate - z * se), estimate + z * se),
        mean_a=mean_a,
        mean_b=mean_b,
        samples=cfg.samples,
    )


# --------------------------------------------------------------------------
# Normality tests
# --------------------------------------------------------------------------


def ks_normal(samples: Sequence[float], mean: float, sd: float) -> tuple[float, float]:
    """
    One-sample Kolmogorov-Smirnov test against N(mean, sd^2).

    Args:
        samples: At least 100 observations.
        mean: Reference mean.
        sd: Reference standard deviation, > 0.

    Returns:
        (D, p) with p from the asymptotic Kolmogorov distribution of sqrt(M) D.

    Raises:
        NonPositiveError: If sd <= 0.
        InsufficientDataError: If fewer than 100 samples are given.
        DegenerateSampleError: If the samples have zero spread.
    """
    x = np.asarray(samples, dtype=float)
    if sd <= 0:
        raise NonPositiveError(f"reference sd must be positive, got {sd}")
    if x.size < 100:
        raise InsufficientDataError(f"KS test needs at least 100 samples, have {x.size}")
    if np.ptp(x) == 0.0:
        raise DegenerateSampleError("samples are constant")
    statistic = float(stats.kstest(x, stats.norm(loc=mean, scale=sd).cdf).statistic)
    return statistic, float(special.kolmogorov(np.sqrt(x.size) * statistic))


def dequantize(values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Spread integer-valued data uniformly over unit cells."""
    return np.asarray(values, dtype=float) + rng.uniform(-0.5, 0.5, size=np.shape(values))


# --------------------------------------------------------------------------
# Exact oracles
# --------------------------------------------------------------------------


def exact_path_covariance(m: ScoreMatrix, norm: Normalization) -> dict[str, Any]:
    """
    Exact moments of the increments a(i, pi(i)) by full enumeration.

    Returns:
        ``increment_cov`` (n x n Cov(a(i,pi(i)), a(j,pi(j)))),
        ``var_y1`` (Var Y(1)) and ``mean_y`` (E Y(k/n), all zero).

    Raises:
        TooLargeError: If n exceeds the enumeration limit.
    """
    table = permutation_table(m.n)
    increments = m.a[np.arange(m.n)[None, :], table]
    paths = matrix_service.build_paths(m, norm, table)
    return {
        "increment_cov": np.cov(increments, rowvar=False, bias=True),
        "var_y1": float(np.var(paths[:, -1])),
        "mean_y": paths.mean(axis=0),
    }


def exact_expectation(
    m: ScoreMatrix, norm: Normalization, g: Union[str, PathFunctional]
) -> float:
    """(n!)^{-1} sum over all permutations of g(Y(pi))."""
    functional = functional_service.parse_functional(g) if isinstance(g, str) else g
    paths = matrix_service.build_paths(m, norm, permutation_table(m.n))
    return float(np.mean(functional_service.evaluate_batch(functional, paths, m.n)))


def exact_distribution_distance(m: ScoreMatrix) -> float:
    """
    sup_x |P[Y(1) <= x] - Phi(x)| for the exact law of Y(1) under the
    tilde normalization, by enumeration.

    Raises:
        TooLargeError: If n exceeds the enumeration limit.
        ZeroMatrixError: If the doubly centered matrix vanishes.
    """
    norm = matrix_service.normalization(m, NormalizationMode.TILDE)
    tilde = matrix_service.tilde_standardize(m.a0)
    table = permutation_table(m.n)
    totals = tilde[np.arange(m.n)[None, :], table].sum(axis=1) / norm.s
    atoms, counts = np.unique(np.round(totals, 12), return_counts=True)
    after = np.cumsum(counts) / totals.size
    before = after - counts / totals.size
    phi = stats.norm.cdf(atoms)
    return float(max(np.max(np.abs(after - phi)), np.max(np.abs(before - phi))))


def gaussian_expectation(
    cov: np.ndarray,
    g: Callable[[np.ndarray], np.ndarray],
    order: int = 24,
) -> float:
    """
    E g(X) for X ~ N(0, cov) by tensor Gauss-Hermite quadrature.

    The covariance is reduced to its positive eigen-directions; up to three
    are supported.

    Args:
        cov: d x d covariance.
        g: Vectorized function taking a (K, d) array of points.
        order: Nodes per direction.

    Returns:
        The expectation.

    Raises:
        RangeError: If cov has rank above three.
    """
    cov = np.asarray(cov, dtype=float)
    eigval, eigvec = np.linalg.eigh(cov)
    keep = eigval > 1e-12 * max(float(eigval[-1]), np.finfo(float).tiny)
    rank = int(keep.sum())
    if rank > 3:
        raise RangeError(f"quadrature supports rank <= 3, got {rank}")
    if rank == 0:
        return float(np.asarray(g(np.zeros((1, cov.shape[0]))))[0])

    nodes, weights = np.polynomial.hermite_e.hermegauss(order)
    weights = weights / math.sqrt(2.0 * math.pi)
    grids = np.meshgrid(*([nodes] * rank), indexing="ij")
    points = np.column_stack([grid.ravel() for grid in grids])
    w = np.prod(np.meshgrid(*([weights] * rank), indexing="ij"), axis=0).ravel()
    basis = eigvec[:, keep] * np.sqrt(eigval[keep])
    return float(np.sum(w * np.asarray(g(points @ basis.T))))


# --------------------------------------------------------------------------
# Output helpers
# --------------------------------------------------------------------------


def canonical_payload(document: Any) -> Any:
    """Copy of a result document without the keys that vary between identical runs."""
    if isinstance(document, dict):
        return {k: canonical_payload(v) for k, v in document.items() if k not in VOLATILE_KEYS}
    if isinstance(document, list):
        return [canonical_payload(v) for v in document]
    return document
