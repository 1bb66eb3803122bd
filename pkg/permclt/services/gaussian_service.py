"""Gaussian surrogates: pre-limit process, limit kernels, Kiefer field and Fernique checks."""

import logging
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import linalg

from permclt.core.config import settings
from permclt.core.exceptions import (
    ConfigError,
    NotPSDError,
    ParseError,
    RangeError,
    ShapeError,
    SymmetryViolationError,
    ZeroAlphaError,
)
from permclt.models.kernel import (
    AlphaFamily,
    BinaryFn,
    Factorization,
    KernelForm,
    LimitKernel,
    PreLimitModel,
    UnaryFn,
)
from permclt.models.path import StepPath, grid_index
from permclt.models.score import Normalization, ScoreMatrix
from permclt.services import matrix_service, tableau_service

logger = logging.getLogger(__name__)

# Upper bound on B * n * n floats held at once by the exact pre-limit sampler.
_NOISE_BUDGET = 4_000_000


# --------------------------------------------------------------------------
# Pre-limit process Z_n
# --------------------------------------------------------------------------


def prelimit_model(m: ScoreMatrix, norm: Normalization) -> PreLimitModel:
    """
    Bundle a score matrix with its normalization and increment covariance.

    Args:
        m: Centered score matrix.
        norm: Normalization.

    Returns:
        PreLimitModel whose sigma is computed from (m, norm).
    """
    return PreLimitModel(score=m, norm=norm, sigma=matrix_service.sigma_matrix(m, norm))


def _prelimit_components(
    model: PreLimitModel, rng: np.random.Generator, size: int
) -> tuple[np.ndarray, np.ndarray]:
    """
    Increments of Z_n^(1) and Z_n^(2) from n^2 standard normals per draw.

    Z_n^(1) increments: sum_l a(i,l) X_il / (s sqrt(n-1));
    Z_n^(2) increments: sum_l a(i,l) Xbar_l / (s sqrt(n-1)).
    """
    n = model.n
    a = model.score.a
    coef = 1.0 / (model.norm.s * np.sqrt(n - 1))
    step = max(1, _NOISE_BUDGET // (n * n))

    first = np.empty((size, n))
    second = np.empty((size, n))
    for start in range(0, size, step):
        stop = min(size, start + step)
        noise = rng.standard_normal((stop - start, n, n))
        first[start:stop] = np.einsum("il,bil->bi", a, noise) * coef
        second[start:stop] = noise.mean(axis=1) @ a.T * coef
    return first, second


def _paths_from_increments(increments: np.ndarray) -> np.ndarray:
    out = np.zeros((increments.shape[0], increments.shape[1] + 1))
    np.cumsum(increments, axis=1, out=out[:, 1:])
    return out


def sample_prelimit_increments(
    model: PreLimitModel, rng: np.random.Generator, size: int
) -> np.ndarray:
    """
    Draw W = (W_1..W_n) by the exact n^2-normal construction.

    W_il = a(i,l)(X_il - Xbar_l) / (s sqrt(n-1)), W_i = sum_l W_il, so that
    Cov(W_i, W_j) = sigma_ij exactly.

    Args:
        model: Pre-limit model.
        rng: Random stream.
        size: Number of draws.

    Returns:
        (size, n) array of increments.
    """
    first, second = _prelimit_components(model, rng, size)
    return first - second


def sample_prelimit_batch(model: PreLimitModel, rng: np.random.Generator, size: int) -> np.ndarray:
    """Batch of Z_n paths, (size, n+1), by the exact construction."""
    return _paths_from_increments(sample_prelimit_increments(model, rng, size))


def sample_prelimit(model: PreLimitModel, rng: np.random.Generator) -> StepPath:
    """
    One realization of Z_n = sum_i W_i J_{i/n}.

    Args:
        model: Pre-limit model.
        rng: Random stream.

    Returns:
        The sampled step path.
    """
    return StepPath.from_increments(sample_prelimit_increments(model, rng, 1)[0])


def sample_prelimit_split_batch(
    model: PreLimitModel, rng: np.random.Generator, size: int
) -> tuple[np.ndarray, np.ndarray]:
    """Batches of (Z_n^(1), Z_n^(2)) paths sharing their normals."""
    first, second = _prelimit_components(model, rng, size)
    return _paths_from_increments(first), _paths_from_increments(second)


def sample_prelimit_split(
    model: PreLimitModel, rng: np.random.Generator
) -> tuple[StepPath, StepPath]:
    """
    The two components of Z_n = Z_n^(1) - Z_n^(2) from shared normals.

    Z_n^(1) has independent increments with Var Z_n^(1)(t) = n f_n(t)/(n-1);
    Cov(Z_n^(2)(t), Z_n^(2)(u)) = n g_n(t,u)/(n-1).

    Args:
        model: Pre-limit model.
        rng: Random stream; consumed exactly as by ``sample_prelimit``.

    Returns:
        (Z_n^(1), Z_n^(2)) as step paths.
    """
    first, second = _prelimit_components(model, rng, 1)
    return StepPath.from_increments(first[0]), StepPath.from_increments(second[0])


def sample_prelimit_factorized(
    factor: Factorization, rng: np.random.Generator, size: int
) -> np.ndarray:
    """
    Batch of Z_n paths through a precomputed factor of sigma.

    O(n^2) per draw instead of the n^2 normals plus O(n^2) work of the exact
    construction; same law up to the factorization tolerance.

    Args:
        factor: Factorization of the n x n sigma matrix.
        rng: Random stream.
        size: Number of draws.

    Returns:
        (size, n+1) array of paths.
    """
    noise = rng.standard_normal((size, factor.factor.shape[1]))
    return _paths_from_increments(noise @ factor.factor.T)


# --------------------------------------------------------------------------
# Symmetric factorization with regularization
# --------------------------------------------------------------------------


def factorize(cov: np.ndarray) -> Factorization:
    """
    Symmetric factor L with L L^T ~= cov.

    Rows with exactly zero variance are pinned to zero. The rest is tried
    with Cholesky, escalating diagonal jitter through the configured ladder
    (relative to the mean variance), then falls back to an eigendecomposition
    with negative eigenvalues clipped to zero.

    Args:
        cov: Symmetric covariance matrix.

    Returns:
        Factorization describing what regularization was applied.

    Raises:
        NotPSDError: If the most negative eigenvalue is below
            -NOT_PSD_TOL times the trace scale.
    """
    cov = np.asarray(cov, dtype=float)
    m = cov.shape[0]
    factor = np.zeros((m, m))
    live = np.flatnonzero(np.diag(cov) != 0.0)
    if live.size == 0:
        return Factorization(factor=factor, method="zero", jitter=0.0, clipped=0)

    sub = cov[np.ix_(live, live)]
    scale = float(np.trace(sub) / live.size)
    for jitter in (0.0,) + tuple(settings.JITTER_LADDER):
        try:
            chol = linalg.cholesky(sub + jitter * scale * np.eye(live.size), lower=True)
        except linalg.LinAlgError:
            continue
        factor[np.ix_(live, live)] = chol
        if jitter:
            logger.debug("Cholesky succeeded with jitter %.1e", jitter)
        return Factorization(factor=factor, method="cholesky", jitter=jitter * scale, clipped=0)

    eigval, eigvec = np.linalg.eigh(sub)
    if eigval[0] < -settings.NOT_PSD_TOL * scale:
        raise NotPSDError(
            f"covariance has eigenvalue {eigval[0]:.3e} below -{settings.NOT_PSD_TOL:g} x {scale:.3e}"
        )
    clipped = int(np.sum(eigval < 0))
    if clipped:
        logger.warning("Clipped %d negative eigenvalue(s) to zero", clipped)
    factor[np.ix_(live, live)] = eigvec * np.sqrt(np.clip(eigval, 0.0, None))
    return Factorization(factor=factor, method="eigh", jitter=0.0, clipped=clipped)


# --------------------------------------------------------------------------
# Limit kernels
# --------------------------------------------------------------------------

_CHECK_GRID = np.linspace(0.0, 1.0, 17)


def limit_kernel_closed(
    f: UnaryFn,
    g: BinaryFn,
    name: str = "custom",
) -> LimitKernel:
    """
    Kernel sigma(t,u) = f(t ^ u) - g(t,u) from closed forms.

    Args:
        f: Nondecreasing function with f(0) = 0.
        g: Symmetric function of two variables.
        name: Label used in outputs.

    Returns:
        Closed-form LimitKernel.

    Raises:
        SymmetryViolationError: If |g(t,u) - g(u,t)| > tolerance on a 17-point grid.
        RangeError: If f(0) != 0 or f decreases on a 17-point grid.
    """
    tt, uu = np.meshgrid(_CHECK_GRID, _CHECK_GRID, indexing="ij")
    if np.max(np.abs(g(tt, uu) - g(uu, tt))) > settings.SYMMETRY_TOL:
        raise SymmetryViolationError(f"g of kernel '{name}' is not symmetric")
    fv = np.asarray(f(_CHECK_GRID), dtype=float)
    if abs(fv[0]) > settings.SYMMETRY_TOL or np.any(np.diff(fv) < -settings.SYMMETRY_TOL):
        raise RangeError(f"f of kernel '{name}' must vanish at 0 and be nondecreasing")
    return LimitKernel(name=name, form=KernelForm.CLOSED, f=f, g=g)


def limit_kernel_gridded(grid: Sequence[float], values: np.ndarray, name: str = "custom-grid") -> LimitKernel:
    """
    Kernel given by its values on a grid (evaluated as a right-continuous step).

    Raises:
        ShapeError: If values is not len(grid) x len(grid).
        SymmetryViolationError: If values is not symmetric.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.size, grid.size):
        raise ShapeError(f"gridded kernel needs {grid.size}x{grid.size} values, got {values.shape}")
    scale = max(float(np.max(np.abs(values))), 1.0)
    if np.max(np.abs(values - values.T)) > settings.SYMMETRY_TOL * scale:
        raise SymmetryViolationError(f"gridded kernel '{name}' is not symmetric")
    return LimitKernel(name=name, form=KernelForm.GRIDDED, grid=grid, values=values)


def bridge_kernel() -> LimitKernel:
    """Brownian bridge: f(t) = t, g(t,u) = t u."""
    return limit_kernel_closed(lambda t: np.asarray(t, dtype=float), lambda t, u: t * u, name="bridge")


def tableau_kernel() -> LimitKernel:
    """Limit kernel of the weak-exceedance process before the 1/6 rescaling."""
    return limit_kernel_closed(tableau_service.limit_f, tableau_service.limit_g, name="tableau")


def zero_kernel() -> LimitKernel:
    return limit_kernel_closed(lambda t: np.zeros_like(np.asarray(t, dtype=float)), lambda t, u: np.zeros(np.broadcast(t, u).shape), name="zero")


def parse_kernel(spec: str) -> LimitKernel:
    """
    Resolve a kernel spec string.

    Specs: ``tableau``, ``bridge``, ``zero`` and ``custom-grid:file.csv``
    (a square CSV of sigma values on the uniform grid k/m).

    Raises:
        ParseError: On unknown specs or unreadable files.
    """
    if spec == "tableau":
        return tableau_kernel()
    if spec == "bridge":
        return bridge_kernel()
    if spec == "zero":
        return zero_kernel()
    if spec.startswith("custom-grid:"):
        path = spec.split(":", 1)[1]
        values = matrix_service.load_matrix(path)
        if values.shape[0] != values.shape[1] or values.shape[0] < 2:
            raise ParseError(f"kernel grid must be square with >= 2 rows, got {values.shape}", source=path)
        grid = np.linspace(0.0, 1.0, values.shape[0])
        return limit_kernel_gridded(grid, values, name=Path(path).name)
    raise ParseError(f"unknown kernel spec '{spec}'", source=spec)


def kernel_factor(kernel: LimitKernel, grid: Sequence[float]) -> Factorization:
    """
    Cached symmetric factor of sigma on ``grid``.

    The cache lives on the kernel and is filled on first use; callers that
    sample from several threads warm it first.
    """
    key = tuple(np.round(np.asarray(grid, dtype=float), 15).tolist())
    if key not in kernel._factor_cache:
        kernel._factor_cache[key] = factorize(kernel.matrix(np.asarray(key)))
        logger.debug("Factorized kernel '%s' on %d points: %s", kernel.name, len(key), kernel._factor_cache[key].describe())
    return kernel._factor_cache[key]


def sample_limit_batch(
    kernel: LimitKernel, grid: Sequence[float], rng: np.random.Generator, size: int
) -> np.ndarray:
    """
    Zero-mean Gaussian vectors with covariance sigma(t_i, t_j).

    Args:
        kernel: Limit kernel.
        grid: Evaluation points.
        rng: Random stream.
        size: Number of draws.

    Returns:
        (size, len(grid)) array.

    Raises:
        NotPSDError: If the kernel matrix cannot be regularized.
    """
    factor = kernel_factor(kernel, grid)
    noise = rng.standard_normal((size, factor.factor.shape[1]))
    return noise @ factor.factor.T


def sample_limit(kernel: LimitKernel, m: int, rng: np.random.Generator) -> StepPath:
    """One draw of the limit process on the uniform grid k/m, as a step path."""
    grid = np.arange(m + 1) / m
    return StepPath(n=m, values=sample_limit_batch(kernel, grid, rng, 1)[0])


# --------------------------------------------------------------------------
# Kiefer process and the stochastic-integral representation
# --------------------------------------------------------------------------


def sample_kiefer(m_v: int, m_w: int, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    """
    Kiefer field K(v,w) = W(v,w) - v W(1,w) on the grid (i/m_v, j/m_w).

    The Brownian sheet W is the double cumulative sum of independent
    N(0, cell area) increments, exact at grid nodes.

    Args:
        m_v: Cells along v.
        m_w: Cells along w.
        rng: Random stream.
        size: Number of fields.

    Returns:
        (size, m_v+1, m_w+1) array; K(0,.) = K(1,.) = K(.,0) = 0.
    """
    cell = np.sqrt(1.0 / (m_v * m_w))
    sheet = np.zeros((size, m_v + 1, m_w + 1))
    increments = rng.standard_normal((size, m_v, m_w)) * cell
    sheet[:, 1:, 1:] = np.cumsum(np.cumsum(increments, axis=1), axis=2)
    v = np.arange(m_v + 1) / m_v
    kiefer = sheet - v[None, :, None] * sheet[:, -1:, :]
    kiefer[:, -1, :] = 0.0
    return kiefer


def _cell_samples(n: int, budget: int = 4_000_000) -> int:
    """Sub-samples per cell side for quadrature, keeping (n r)^2 within budget."""
    return max(1, int(np.sqrt(budget)) // n)


def alpha_family(
    name: str,
    alpha_n: np.ndarray,
    alpha: BinaryFn,
) -> AlphaFamily:
    """
    Derive the norms of a step family and its limit.

    Quadrature uses r x r midpoints inside each of the n x n cells, so
    alpha_n is integrated exactly and alpha to midpoint accuracy.

    Args:
        name: Family label.
        alpha_n: n x n matrix; alpha_n(v,w) = alpha_n[ceil(nv)-1, ceil(nw)-1].
        alpha: Limit function on [0,1]^2.

    Returns:
        AlphaFamily with ||alpha||_2, ||alpha||_inf, alpha+ = ||alpha||_inf/||alpha||_2,
        ||eps_n||_2 and ||eps~_n||_2.

    Raises:
        ZeroAlphaError: If ||alpha||_2 vanishes.
    """
    alpha_n = np.asarray(alpha_n, dtype=float)
    n = alpha_n.shape[0]
    r = _cell_samples(n)
    mids = (np.arange(n * r) + 0.5) / (n * r)
    limit = alpha(mids[:, None], mids[None, :])
    step = np.repeat(np.repeat(alpha_n, r, axis=0), r, axis=1)

    norm2 = float(np.sqrt(np.mean(limit**2)))
    if norm2 == 0.0:
        raise ZeroAlphaError(f"alpha of family '{name}' is a.e. zero")
    step_norm2 = float(np.sqrt(np.mean(alpha_n**2)))
    norm_inf = float(np.max(np.abs(limit)))
    eps_norm2 = float(np.sqrt(np.mean((step - limit) ** 2))) / norm2
    eps_tilde = (
        float(np.sqrt(np.mean((step / step_norm2 - limit / norm2) ** 2)))
        if step_norm2 > 0
        else float("inf")
    )
    return AlphaFamily(
        name=name,
        n=n,
        alpha_n=alpha_n,
        alpha=alpha,
        norm2=norm2,
        norm_inf=norm_inf,
        alpha_plus=norm_inf / norm2,
        eps_norm2=eps_norm2,
        eps_tilde_norm2=eps_tilde,
    )


def tableau_alpha(t, u) -> np.ndarray:
    """alpha(t,u) = 1{t <= u} - 1 + t."""
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    return (t <= u).astype(float) - 1.0 + t


def parse_alpha_family(kind: str, n: int) -> AlphaFamily:
    """
    Built-in alpha families: ``tableau`` (weak exceedances) and ``constant``
    (alpha = 1, whose integral is a Brownian bridge).

    Raises:
        ParseError: On an unknown kind.
    """
    if kind == "tableau":
        return alpha_family("tableau", tableau_service.exceedance_matrix(n).a, tableau_alpha)
    if kind == "constant":
        return alpha_family("constant", np.ones((n, n)), lambda t, u: np.ones(np.broadcast(t, u).shape))
    raise ParseError(f"unknown alpha family '{kind}'", source=kind)


def _integral_design(fam: AlphaFamily, m: int, refine: int) -> tuple[np.ndarray, float]:
    size = m * refine
    mids = (np.arange(size) + 0.5) / size
    design = fam.alpha(mids[:, None], mids[None, :])
    sigma_a = float(np.sqrt(np.mean(design**2)))
    if sigma_a == 0.0:
        raise ZeroAlphaError(f"alpha of family '{fam.name}' vanishes on the integration grid")
    return design, sigma_a


def sample_limit_integral_batch(
    fam: AlphaFamily,
    m: int,
    rng: np.random.Generator,
    size: int,
    refine: int = 4,
) -> np.ndarray:
    """
    Z(t) = sigma_a^{-1} integral over [0,t] x [0,1] of alpha dK, on t = k/m.

    The square is cut into (m refine)^2 cells; alpha is taken at cell
    midpoints and dK = dW - dv (sum of dW over the whole v-column).
    sigma_a is the L2 norm of alpha on the same cells.

    Args:
        fam: Alpha family (only the limit alpha is used).
        m: Output grid resolution.
        rng: Random stream.
        size: Number of paths.
        refine: Integration cells per output cell, per axis.

    Returns:
        (size, m+1) array of paths with Z(0) = 0.

    Raises:
        ZeroAlphaError: If alpha vanishes on the integration grid.
    """
    design, sigma_a = _integral_design(fam, m, refine)
    cells = m * refine
    dv = 1.0 / cells
    cell_sd = np.sqrt(dv * dv)
    step = max(1, _NOISE_BUDGET // (cells * cells))

    out = np.zeros((size, m + 1))
    for start in range(0, size, step):
        stop = min(size, start + step)
        dw = rng.standard_normal((stop - start, cells, cells)) * cell_sd
        column = dw.sum(axis=1)
        rows = np.einsum("vw,bvw->bv", design, dw) - dv * column @ design.T
        fine = np.cumsum(rows, axis=1)
        out[start:stop, 1:] = fine[:, refine - 1 :: refine] / sigma_a
    return out


def sample_limit_integral(fam: AlphaFamily, m: int, rng: np.random.Generator, refine: int = 4) -> StepPath:
    """One path of the stochastic-integral representation on k/m."""
    return StepPath(n=m, values=sample_limit_integral_batch(fam, m, rng, 1, refine)[0])


def integral_covariance(fam: AlphaFamily, m: int, refine: int = 4) -> np.ndarray:
    """
    Exact covariance of ``sample_limit_integral_batch`` on t = k/m.

    sigma_a^{-2} [ sum_{v <= t^u} sum_w alpha^2 dv dw
                   - sum_w dw (sum_{v <= t} alpha dv)(sum_{x <= u} alpha dx) ].
    """
    design, sigma_a = _integral_design(fam, m, refine)
    cells = m * refine
    dv = 1.0 / cells
    sq = np.concatenate(([0.0], np.cumsum((design**2).sum(axis=1) * dv * dv)))[::refine]
    partial = np.zeros((cells + 1, cells))
    partial[1:] = np.cumsum(design * dv, axis=0)
    partial = partial[::refine]
    idx = np.arange(m + 1)
    return (sq[np.minimum.outer(idx, idx)] - partial @ partial.T * dv) / sigma_a**2


# --------------------------------------------------------------------------
# Fernique-type regularity
# --------------------------------------------------------------------------


def fernique_check(
    kernel: LimitKernel,
    beta: float,
    levels: int = 16,
    bases: int = 9,
) -> float:
    """
    Estimate C_g^2 in |g(t,t) + g(u,u) - 2 g(t,u)| <= C_g^2 |u-t|^beta.

    Compares pairs (t, t+h) for t on a uniform base grid and h = 2^-k,
    k = 1..levels. If the per-level supremum keeps increasing over the
    finest six levels and grows at least eightfold across them, the ratio
    is taken to diverge.

    Args:
        kernel: Closed-form kernel whose g component is tested.
        beta: Exponent in (0, 2].
        levels: Number of dyadic gap levels.
        bases: Number of base points t.

    Returns:
        The estimated constant, or ``inf`` if the ratio diverges.

    Raises:
        ConfigError: If the kernel is gridded.
        RangeError: If beta is outside (0, 2].
    """
    if kernel.form is not KernelForm.CLOSED:
        raise ConfigError(f"Fernique check needs a closed-form kernel, '{kernel.name}' is gridded")
    if not 0.0 < beta <= 2.0:
        raise RangeError(f"beta must lie in (0, 2], got {beta}")
    g = kernel.g
    t = np.linspace(0.0, 1.0, bases)
    per_level = []
    for k in range(1, levels + 1):
        h = 2.0**-k
        base = t[t + h <= 1.0]
        u = base + h
        incr = np.abs(g(base, base) + g(u, u) - 2.0 * g(base, u))
        per_level.append(float(np.max(incr)) / h**beta)

    tail = np.asarray(per_level[-6:])
    if tail[0] > 0 and np.all(np.diff(tail) > 0) and tail[-1] >= 8.0 * tail[0]:
        logger.info("Fernique ratio diverges for beta=%g", beta)
        return float("inf")
    return max(per_level)


def prelimit_covariance_grid(model: PreLimitModel, grid: Sequence[float]) -> np.ndarray:
    """
    Cov(Z_n(t), Z_n(u)) = n/(n-1) (f_n(t ^ u) - g_n(t,u)) at the given times.

    Args:
        model: Pre-limit model.
        grid: Times in [0, 1], evaluated on the k/n grid (right-continuous).

    Returns:
        len(grid) x len(grid) covariance matrix.
    """
    full = matrix_service.prelimit_covariance(model.score, model.norm)
    index = grid_index(model.n, grid)
    return full[np.ix_(index, index)]
