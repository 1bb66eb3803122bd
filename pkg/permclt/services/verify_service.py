"""Verification suites: exact identities, Monte Carlo limit checks and reproducibility."""

import logging
import math
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from permclt.core.config import settings
from permclt.core.exceptions import UnknownSuiteError
from permclt.core.rng import LANE_DEQUANTIZE, LANE_MATRIX, LANE_SECONDARY, substream
from permclt.models.ensemble import EnsembleStats
from permclt.models.functional import BallFunctional
from permclt.models.path import StepPath
from permclt.models.score import NormalizationMode
from permclt.schemas.result import CheckResult, SuiteReport, VerifyReport
from permclt.schemas.run import VerifyOptions, build_run_config
from permclt.services import (
    ensemble_service,
    functional_service,
    gaussian_service,
    matrix_service,
    tableau_service,
)

logger = logging.getLogger(__name__)

Suite = Callable[[VerifyOptions], list[CheckResult]]

DEFAULT_BALL = "ball:eps=0.5:p=2:rho=1:eta=0.5"


def _within(
    name: str,
    target: float,
    estimate: float,
    se: float,
    floor: float = 0.0,
    detail: str = "",
) -> CheckResult:
    """|estimate - target| <= max(SE_MULTIPLIER * se, floor)."""
    bound = max(settings.SE_MULTIPLIER * se, floor)
    return CheckResult(
        name=name,
        target=float(target),
        estimate=float(estimate),
        se=float(se),
        tolerance=float(bound),
        passed=bool(abs(estimate - target) <= bound),
        detail=detail,
    )


def _close(name: str, target: float, estimate: float, tol: float, detail: str = "") -> CheckResult:
    return CheckResult(
        name=name,
        target=float(target),
        estimate=float(estimate),
        tolerance=float(tol),
        passed=bool(abs(estimate - target) <= tol),
        detail=detail,
    )


def _count(name: str, failures: int, detail: str = "") -> CheckResult:
    return CheckResult(name=name, target=0.0, estimate=float(failures), tolerance=0.0, passed=failures == 0, detail=detail)


def _z_scores(estimate: np.ndarray, target: np.ndarray, se: np.ndarray, slack: Optional[np.ndarray] = None) -> np.ndarray:
    """Entrywise |estimate - target| / se; zero-variance entries score 0 when exact, inf otherwise."""
    gap = np.abs(estimate - target)
    if slack is not None:
        gap = np.maximum(gap - slack, 0.0)
    exact = se == 0.0
    safe = np.where(exact, 1.0, se)
    return np.where(exact, np.where(gap <= 1e-12, 0.0, np.inf), gap / safe)


def _collect(samples: int, seed: int, workers: int, labels: Sequence[float], draw) -> EnsembleStats:
    """Run ``draw(rng, size) -> (size, len(labels))`` chunk-wise and merge in order."""
    parts = ensemble_service.map_chunks(
        samples, seed, workers, lambda rng, size: EnsembleStats.from_batch(labels, draw(rng, size))
    )
    total = EnsembleStats(grid=labels)
    for part in parts:
        total = total.merge(part)
    return total


# --------------------------------------------------------------------------
# Exact suites
# --------------------------------------------------------------------------


def suite_exact_cov(opts: VerifyOptions) -> list[CheckResult]:
    """Enumeration covariance of a(i,pi(i)) against s^2 sigma_ij on random matrices."""
    sizes = [opts.n] if opts.n else range(3, 8)
    checks = []
    for n in sizes:
        worst = 0.0
        worst_var = 0.0
        for trial in range(opts.trials):
            a0 = substream(opts.seed, 1000 * n + trial, LANE_MATRIX).uniform(size=(n, n))
            m = matrix_service.center_rows(a0)
            norm = matrix_service.normalization(m)
            target = norm.s2 * matrix_service.sigma_matrix(m, norm).sigma
            exact = ensemble_service.exact_path_covariance(m, norm)["increment_cov"]
            worst = max(worst, float(np.max(np.abs(exact - target)) / np.max(np.abs(target))))

            tilde = matrix_service.normalization(m, NormalizationMode.TILDE)
            var_y1 = ensemble_service.exact_path_covariance(m, tilde)["var_y1"]
            worst_var = max(worst_var, abs(var_y1 - 1.0))
        checks.append(_close(f"Cov(a(i,pi(i)),a(j,pi(j))) = s^2 sigma, n={n}", 0.0, worst, 1e-10, "max relative deviation"))
        checks.append(_close(f"Var Y(1) = 1 with tilde scale, n={n}", 0.0, worst_var, 1e-10))
    return checks


def suite_moments(opts: VerifyOptions) -> list[CheckResult]:
    """Enumeration against the closed-form exceedance moments, in exact rationals."""
    sizes = [opts.n] if opts.n else range(3, 8)
    checks = []
    for n in sizes:
        table = ensemble_service.permutation_table(n)
        batch = tableau_service.exceedance_batch(table)
        ind = batch.indicators
        total = table.shape[0]
        failures = 0
        for i in range(1, n + 1):
            failures += Fraction(int(ind[:, i - 1].sum()), total) != tableau_service.mean_indicator(n, i)
            for j in range(i + 1, n + 1):
                both = int((ind[:, i - 1] * ind[:, j - 1]).sum())
                failures += Fraction(both, total) != tableau_service.joint_indicator(n, i, j)
                failures += Fraction(both, int(ind[:, j - 1].sum())) != tableau_service.conditional_indicator(n, i, j)
        for k in range(n + 1):
            failures += Fraction(int(batch.s0[:, k].sum()), total) != tableau_service.mean_s0(n, k)
        checks.append(_count(f"indicator moments, n={n}", failures, "mismatching closed forms"))

        rows = [int(r) for r in batch.rows]
        mean_rows = Fraction(sum(rows), total)
        var_rows = Fraction(sum(r * r for r in rows), total) - mean_rows**2
        checks.append(_count(f"Var R_n exact, n={n}", int(var_rows != tableau_service.exact_row_variance(n))))
        mean_area = Fraction(int(batch.area.sum()), total)
        checks.append(_count(f"E A_n exact, n={n}", int(mean_area != tableau_service.exact_area_mean(n))))

    for n in (10, 100, 1000, 10_000):
        checks.append(_close(f"|E S_0 - n mu| <= 1, n={n}", 0.0, tableau_service.mean_deviation(n), 1.0))
    return checks


def suite_lyapounov(opts: VerifyOptions) -> list[CheckResult]:
    """Lambda sqrt(n) for the exceedance family, and the alpha-family norms."""
    limit = 6.0**1.5 / 10.0
    checks = []
    for n in (100, 1000, 10_000):
        value = tableau_service.lyapounov_scaled(n)
        checks.append(CheckResult(
            name=f"Lambda sqrt(n) in [1.3, 1.6], n={n}",
            estimate=value,
            target=limit,
            passed=1.3 <= value <= 1.6,
        ))
    checks.append(_close("Lambda sqrt(n) near 6^1.5/10, n=10000", limit, tableau_service.lyapounov_scaled(10_000), 0.02 * limit))
    for n in (100, 1000):
        m = tableau_service.exceedance_matrix(n)
        dense = matrix_service.lyapounov_ratio(m, matrix_service.normalization(m)) * math.sqrt(n)
        closed = tableau_service.lyapounov_scaled(n)
        checks.append(_close(f"dense and row-sum Lambda agree, n={n}", closed, dense, 1e-9 * closed))

    n = opts.n or 200
    fam = gaussian_service.parse_alpha_family("tableau", n)
    checks.append(_close("||alpha||_2^2 = 1/6", 1.0 / 6.0, fam.norm2**2, 1e-3))
    checks.append(_close("alpha+ = sqrt(6)", math.sqrt(6.0), fam.alpha_plus, 1e-2))
    checks.append(CheckResult(
        name=f"||eps_n||_2^2 <= 18/n, n={n}",
        target=18.0 / n,
        estimate=fam.eps_norm2**2,
        passed=fam.eps_norm2**2 <= 18.0 / n,
    ))
    checks.append(CheckResult(
        name="||eps~_n||_2 <= 2 ||eps_n||_2",
        target=2.0 * fam.eps_norm2,
        estimate=fam.eps_tilde_norm2,
        passed=fam.eps_tilde_norm2 <= 2.0 * fam.eps_norm2,
    ))
    return checks


def _min_kernel():
    return gaussian_service.limit_kernel_closed(lambda t: np.asarray(t, dtype=float), np.minimum, name="min")


def suite_fernique(opts: VerifyOptions) -> list[CheckResult]:
    """Fernique constants over dyadic gaps."""
    tableau = gaussian_service.fernique_check(gaussian_service.tableau_kernel(), 2.0)
    zero = gaussian_service.fernique_check(gaussian_service.zero_kernel(), 2.0)
    rough = gaussian_service.fernique_check(_min_kernel(), 2.0)
    return [
        CheckResult(name="tableau g, beta=2: finite", estimate=tableau, passed=bool(np.isfinite(tableau))),
        _close("g = 0: constant 0", 0.0, zero, 0.0),
        CheckResult(
            name="g(t,u) = t ^ u, beta=2: diverges",
            estimate=rough if np.isfinite(rough) else None,
            passed=bool(np.isinf(rough)),
            detail="first-order increments cannot satisfy beta = 2",
        ),
    ]


def suite_functionals(opts: VerifyOptions) -> list[CheckResult]:
    """Range, plateau, cutoff smoothness, Minkowski and sandwich laws of the catalog."""
    n = opts.n or 50
    count = 1000
    rng = substream(opts.seed, 0, LANE_SECONDARY)
    paths = np.zeros((count, n + 1))
    paths[:, 1:] = np.cumsum(rng.standard_normal((count, n)) / math.sqrt(n), axis=1)
    checks = []

    eps, p = 0.3, 3.0
    h = functional_service.h_eps_p(paths, eps, p)
    rho, eta = float(np.median(h)), 0.25
    values = functional_service.ball(BallFunctional(eps=eps, p=p, rho=rho, eta=eta), paths)
    failures = int(np.sum((h <= rho) & (values != 1.0)) + np.sum((h >= rho + eta) & (values != 0.0)))
    checks.append(_count("plateau laws", failures))
    checks.append(_count("range [0, 1]", int(np.sum((values < 0.0) | (values > 1.0)))))
    order = np.argsort(h, kind="stable")
    checks.append(_count("nonincreasing in h", int(np.sum(np.diff(values[order]) > 0.0))))

    phi = functional_service.phi_cutoff
    finest = 0.0
    third = []
    for x in (0.0, 1.0):
        for step in (1e-2, 1e-3, 1e-4):
            d1 = (phi(x + step) - phi(x - step)) / (2 * step)
            d2 = (phi(x + step) - 2 * phi(x) + phi(x - step)) / step**2
            d3 = (phi(x + 2 * step) - 2 * phi(x + step) + 2 * phi(x - step) - phi(x - 2 * step)) / (2 * step**3)
            third.append(abs(d3))
            if step == 1e-4:
                finest = max(finest, abs(d1), abs(d2), abs(d3))
    decreasing = all(third[k + 1] < third[k] for k in (0, 1, 3, 4))
    checks.append(_close("cutoff derivatives vanish at 0 and 1", 0.0, finest, 0.05))
    checks.append(CheckResult(name="third differences shrink with the step", passed=decreasing))

    other = np.zeros_like(paths)
    other[:, 1:] = np.cumsum(rng.standard_normal((count, n)) * 0.3, axis=1)
    lhs = functional_service.h_eps_p(paths + other, eps, p)
    lp = np.mean(np.abs(other[:, :n]) ** p, axis=1) ** (1.0 / p)
    rhs = functional_service.h_eps_p(paths, eps, p) + lp
    checks.append(_count("Minkowski: h(y+z) <= h(y) + ||z||_p", int(np.sum(lhs > rhs * (1 + 1e-12) + 1e-12))))

    centers = np.zeros_like(paths)
    centers[:, 1:] = np.cumsum(rng.standard_normal((count, n)) * 0.1, axis=1)
    diff = np.abs(paths - centers)[:, :n].max(axis=1)
    inside = 0
    for w, s, gamma in zip(paths, centers, diff * 1.01 + 1e-9):
        center = StepPath(n=n, values=s)
        g = BallFunctional(eps=eps * gamma, p=p, rho=gamma * math.sqrt(1 + eps * eps), eta=0.1, center=center, center_label="random")
        inside += functional_service.ball(g, StepPath(n=n, values=w)) != 1.0
    checks.append(_count("sandwich: sup-ball members score 1", int(inside)))

    big_p = functional_service.h_eps_p(paths, eps, 2048.0)
    sup = np.sqrt(eps * eps + paths[:, :n] ** 2).max(axis=1)
    checks.append(_close("h -> sup sqrt(eps^2 + y^2) as p grows", 0.0, float(np.max(np.abs(big_p / sup - 1.0))), 1e-2))

    unit = BallFunctional(eps=1.0, p=1.0, rho=0.0, eta=1.0)
    checks.append(_close("norm scale (1,1,1) = 1", 1.0, functional_service.norm_scale(unit), 1e-15))
    checks.append(_close(
        "norm scale: doubling eta divides by 8",
        1.0 / 8.0,
        functional_service.norm_scale(BallFunctional(eps=1.0, p=1.0, rho=0.0, eta=2.0)),
        1e-15,
    ))
    checks.append(_close(
        "norm scale: doubling p multiplies by 4",
        4.0,
        functional_service.norm_scale(BallFunctional(eps=1.0, p=2.0, rho=0.0, eta=1.0)),
        1e-15,
    ))
    return checks


# --------------------------------------------------------------------------
# Monte Carlo suites
# --------------------------------------------------------------------------


def _exceedance_sample(n: int, samples: int, seed: int, workers: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    def chunk(rng, size):
        batch = tableau_service.exceedance_batch(ensemble_service.random_permutations(n, size, rng))
        return batch.rows, batch.area, batch.area_identity

    parts = ensemble_service.map_chunks(samples, seed, workers, chunk)
    return tuple(np.concatenate([part[k] for part in parts]) for k in range(3))


def suite_tableau_cov(opts: VerifyOptions) -> list[CheckResult]:
    """Empirical Cov(Y^_n(t), Y^_n(u)) against the limit kernel."""
    n = opts.n or 1000
    cfg = build_run_config(
        n=n,
        samples=opts.samples or 20_000,
        seed=opts.seed,
        workers=opts.workers,
        grid=[0.25, 0.5, 0.75, 1.0],
        source="tableau",
    )
    stats = ensemble_service.run_ensemble(cfg)
    cov, se = stats.covariance(), stats.covariance_se()
    checks = []
    for a, t in enumerate(cfg.grid):
        for b in range(a, len(cfg.grid)):
            u = cfg.grid[b]
            checks.append(_within(
                f"Cov(Y^({t:g}), Y^({u:g}))", tableau_service.limit_cov_hat(t, u), cov[a, b], se[a, b], floor=0.01
            ))
    return checks


def suite_area(opts: VerifyOptions) -> list[CheckResult]:
    """Area statistic: identity, variance scaling, normality and the closed-form limit."""
    n = opts.n or 1000
    _, area, identity = _exceedance_sample(n, opts.samples or 20_000, opts.seed, opts.workers)
    target = 1.0 / 144.0
    mean = float(tableau_service.exact_area_mean(n))
    spread = ensemble_service.dequantize(area, substream(opts.seed, 0, LANE_DEQUANTIZE))
    stat, pvalue = ensemble_service.ks_normal(spread, mean, n**1.5 / 12.0)
    return [
        _count("two area formulas agree", int(np.sum(area != identity))),
        _close("Var(A_n)/n^3 within 10% of 1/144", target, tableau_service.area_variance_scaled(area, n), 0.1 * target),
        CheckResult(name="KS of A_n vs normal, alpha=0.01", estimate=pvalue, tolerance=0.01, passed=pvalue > 0.01, detail=f"D={stat:.5f}"),
        _close("closed-form limit variance", target, tableau_service.area_limit_variance(), 1e-12),
        _close("quadrature limit variance", target, tableau_service.area_functional(tableau_service.limit_cov_hat), 1e-8),
    ]


def suite_rows(opts: VerifyOptions) -> list[CheckResult]:
    """Row count R_n = S_0(1): variance scaling and normality."""
    n = opts.n or 1000
    rows, _, _ = _exceedance_sample(n, opts.samples or 20_000, opts.seed, opts.workers)
    target = 1.0 / 12.0
    sd = math.sqrt(float(tableau_service.exact_row_variance(n)) + 1.0 / 12.0)
    spread = ensemble_service.dequantize(rows, substream(opts.seed, 1, LANE_DEQUANTIZE))
    stat, pvalue = ensemble_service.ks_normal(spread, (n + 1) / 2.0, sd)
    return [
        _close("Var(R_n)/n within 10% of 1/12", target, tableau_service.rows_variance_scaled(rows, n), 0.1 * target),
        CheckResult(name="KS of R_n vs normal, alpha=0.01", estimate=pvalue, tolerance=0.01, passed=pvalue > 0.01, detail=f"D={stat:.5f}"),
    ]


KIEFER_PAIRS = (
    ((32, 64), (32, 64)),
    ((16, 32), (48, 32)),
    ((16, 16), (16, 48)),
    ((48, 64), (32, 32)),
    ((8, 60), (56, 20)),
    ((32, 16), (32, 16)),
    ((24, 40), (40, 24)),
    ((60, 60), (60, 60)),
    ((4, 64), (62, 64)),
    ((40, 8), (20, 56)),
)


def suite_kiefer(opts: VerifyOptions) -> list[CheckResult]:
    """Kiefer covariance (v1^v2 - v1 v2)(w1^w2) at fixed pairs on a 64 x 64 grid."""
    size = 64
    rows = np.array([p[k][0] for p in KIEFER_PAIRS for k in (0, 1)])
    cols = np.array([p[k][1] for p in KIEFER_PAIRS for k in (0, 1)])

    def draw(rng, count):
        return gaussian_service.sample_kiefer(size, size, rng, count)[:, rows, cols]

    stats = _collect(opts.samples or 100_000, opts.seed, opts.workers, np.arange(rows.size, dtype=float), draw)
    cov, se = stats.covariance(), stats.covariance_se()
    checks = []
    for k, ((i1, j1), (i2, j2)) in enumerate(KIEFER_PAIRS):
        v1, w1, v2, w2 = i1 / size, j1 / size, i2 / size, j2 / size
        target = (min(v1, v2) - v1 * v2) * min(w1, w2)
        checks.append(_within(f"Cov K({v1:g},{w1:g}) K({v2:g},{w2:g})", target, cov[2 * k, 2 * k + 1], se[2 * k, 2 * k + 1]))

    field = gaussian_service.sample_kiefer(size, size, substream(opts.seed, 0, LANE_SECONDARY), 16)
    edges = np.abs(field[:, 0, :]).max() + np.abs(field[:, -1, :]).max() + np.abs(field[:, :, 0]).max()
    checks.append(_close("K vanishes on v=0, v=1 and w=0", 0.0, float(edges), 0.0))
    return checks


def suite_prelimit(opts: VerifyOptions) -> list[CheckResult]:
    """Exact pre-limit sampler fidelity, split identity and pre-limit-to-limit convergence."""
    n = opts.n or 20
    samples = opts.samples or 100_000
    m = tableau_service.exceedance_matrix(n)
    model = gaussian_service.prelimit_model(m, matrix_service.normalization(m))
    sigma = model.sigma.sigma

    stats = _collect(
        samples, opts.seed, opts.workers, np.arange(n, dtype=float),
        lambda rng, size: gaussian_service.sample_prelimit_increments(model, rng, size),
    )
    upper = np.triu_indices(n)
    z = _z_scores(stats.covariance()[upper], sigma[upper], stats.covariance_se()[upper])
    beyond = int(np.sum(z > settings.SE_MULTIPLIER))
    marginal = int(np.sum((z > 3.0) & (z <= settings.SE_MULTIPLIER)))
    checks = [
        _count(f"Cov(W_i, W_j) within 4 SE ({upper[0].size} pairs)", beyond),
        CheckResult(
            name="pairs in (3 SE, 4 SE] at most 2",
            target=2.0,
            estimate=float(marginal),
            passed=marginal <= 2,
        ),
    ]
    mz = _z_scores(stats.mean, np.zeros(n), stats.mean_se())
    checks.append(_count("E W_i = 0 within 4 SE", int(np.sum(mz > settings.SE_MULTIPLIER))))

    whole = gaussian_service.sample_prelimit(model, substream(opts.seed, 0, LANE_SECONDARY))
    first, second = gaussian_service.sample_prelimit_split(model, substream(opts.seed, 0, LANE_SECONDARY))
    gap = float(np.max(np.abs((first - second).values - whole.values)))
    roundoff = 64 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(whole.values))))
    checks.append(_close("Z_n = Z_n^(1) - Z_n^(2) pathwise", 0.0, gap, roundoff))

    fn, _ = matrix_service.empirical_fn_gn(m, model.norm)
    split_count = min(samples, 20_000)
    var1 = _collect(
        split_count, opts.seed, opts.workers, [1.0],
        lambda rng, size: gaussian_service.sample_prelimit_split_batch(model, rng, size)[0][:, -1:],
    )
    checks.append(_within("Var Z_n^(1)(1) = n f_n(1)/(n-1)", n * fn[-1] / (n - 1), var1.covariance()[0, 0], var1.covariance_se()[0, 0]))

    factor = gaussian_service.factorize(sigma)
    rebuilt = factor.factor @ factor.factor.T
    checks.append(_close(
        "factor reproduces sigma (relative)", 0.0,
        float(np.max(np.abs(rebuilt - sigma)) / np.max(np.abs(sigma))), 1e-8, str(factor.describe()),
    ))

    grid = [0.25, 0.5, 0.75, 1.0]
    limit = gaussian_service.tableau_kernel().matrix(np.asarray(grid))
    errors = []
    for size in (50, 200, 800):
        mm = tableau_service.exceedance_matrix(size)
        mod = gaussian_service.prelimit_model(mm, matrix_service.normalization(mm))
        errors.append(float(np.max(np.abs(gaussian_service.prelimit_covariance_grid(mod, grid) - limit))))
    ratios = [errors[1] / errors[0], errors[2] / errors[1]]
    checks.append(CheckResult(
        name="pre-limit covariance error decays (ratios < 0.6)",
        target=0.6,
        estimate=max(ratios),
        passed=all(r < 0.6 for r in ratios),
        detail=f"errors at n=50,200,800: {errors}",
    ))
    return checks


def _gridded_check(label: str, cov, se, target, slack=None) -> list[CheckResult]:
    upper = np.triu_indices(target.shape[0])
    z = _z_scores(cov[upper], target[upper], se[upper], None if slack is None else slack[upper])
    allowed = max(2, math.ceil(0.005 * z.size))
    over4 = int(np.sum(z > settings.SE_MULTIPLIER))
    over5 = int(np.sum(z > 5.0))
    return [
        CheckResult(
            name=f"{label}: entries beyond 4 SE",
            target=float(allowed),
            estimate=float(over4),
            passed=over4 <= allowed,
            detail=f"{z.size} entries, max z={float(np.max(z)):.3f}",
        ),
        _count(f"{label}: entries beyond 5 SE", over5),
    ]


def suite_limit_consistency(opts: VerifyOptions) -> list[CheckResult]:
    """Gridded-factor and stochastic-integral samplers against the closed-form tableau kernel."""
    m = opts.n or 32
    samples = opts.samples or 100_000
    grid = np.arange(m + 1) / m
    kernel = gaussian_service.tableau_kernel()
    target = kernel.matrix(grid)

    factor = gaussian_service.kernel_factor(kernel, grid)
    rebuilt = factor.factor @ factor.factor.T
    checks = [_close(
        "factor reproduces kernel (relative)", 0.0,
        float(np.max(np.abs(rebuilt - target)) / np.max(np.abs(target))), 1e-8, str(factor.describe()),
    )]

    limit = ensemble_service.LimitSource(kernel, m)
    limit.warm()
    stats = _collect(samples, opts.seed, opts.workers, grid, limit.sample)
    checks += _gridded_check("gridded sampler", stats.covariance(), stats.covariance_se(), target)

    fam = gaussian_service.parse_alpha_family("tableau", m)
    refine = 4
    gap = np.abs(gaussian_service.integral_covariance(fam, m, refine) - target)
    stats = _collect(
        samples, opts.seed ^ 0x5A5A, opts.workers, grid,
        lambda rng, size: gaussian_service.sample_limit_integral_batch(fam, m, rng, size, refine),
    )
    checks += _gridded_check("stochastic integral", stats.covariance(), stats.covariance_se(), target, slack=gap)
    checks.append(CheckResult(
        name="integral discretization gap",
        estimate=float(gap.max()),
        passed=bool(np.isfinite(gap.max())),
        detail=f"refine={refine}",
    ))
    return checks


def suite_distance_decay(opts: VerifyOptions) -> list[CheckResult]:
    """|E g(Y_n) - E g(Z_n)| shrinks from n=25 to n=400; quadrature oracle at n=2."""
    samples = opts.samples or 1_000_000
    functional = functional_service.parse_functional(DEFAULT_BALL)
    estimates = {}
    for n in (25, 400):
        cfg = build_run_config(n=n, samples=samples, seed=opts.seed, workers=opts.workers, grid=[1.0])
        m = tableau_service.exceedance_matrix(n)
        norm = matrix_service.normalization(m)
        model = gaussian_service.prelimit_model(m, norm)
        estimates[n] = ensemble_service.distance_estimate(
            cfg,
            functional,
            ensemble_service.PermutationSource(m, norm),
            ensemble_service.PrelimitSource(model, "factorized"),
        )
    small, large = estimates[25], estimates[400]
    pooled = math.hypot(small.se, large.se)
    checks = [CheckResult(
        name="distance(400) < distance(25) + 3 pooled SE",
        target=small.estimate + 3 * pooled,
        estimate=large.estimate,
        se=pooled,
        passed=large.estimate < small.estimate + 3 * pooled,
        detail=f"distance(25)={small.estimate:.6g}, distance(400)={large.estimate:.6g}",
    )]

    hand = matrix_service.center_rows(np.array([[1.0, 0.0], [0.0, 0.0]]))
    norm = matrix_service.normalization(hand)
    g = functional_service.parse_functional("ball:eps=0.5:p=2:rho=0.6:eta=0.5")
    exact_y = ensemble_service.exact_expectation(hand, norm, g)
    exact_z = ensemble_service.gaussian_expectation(
        matrix_service.prelimit_covariance(hand, norm),
        lambda pts: functional_service.evaluate_batch(g, pts, 2),
    )
    cfg = build_run_config(n=2, samples=min(samples, 100_000), seed=opts.seed, workers=opts.workers, grid=[1.0])
    mc = ensemble_service.distance_estimate(
        cfg,
        g,
        ensemble_service.PermutationSource(hand, norm),
        ensemble_service.PrelimitSource(gaussian_service.prelimit_model(hand, norm)),
    )
    checks.append(_within("n=2 distance vs enumeration + quadrature", abs(exact_y - exact_z), mc.estimate, mc.se))
    return checks


def suite_determinism(opts: VerifyOptions) -> list[CheckResult]:
    """Identical configs give identical statistics at one and at several workers."""
    base = dict(
        n=opts.n or 200,
        samples=opts.samples or 5_000,
        seed=opts.seed,
        grid=[0.5, 1.0],
        functionals=[DEFAULT_BALL, "integral"],
        source="tableau",
    )
    single = ensemble_service.run_ensemble(build_run_config(workers=1, **base)).summary()
    again = ensemble_service.run_ensemble(build_run_config(workers=1, **base)).summary()
    several = ensemble_service.run_ensemble(build_run_config(workers=max(2, opts.workers), **base)).summary()
    return [
        CheckResult(name="re-run gives identical statistics", passed=single == again),
        CheckResult(name="worker count does not change statistics", passed=single == several),
    ]


SUITES: dict[str, Suite] = {
    "exact-cov": suite_exact_cov,
    "moments": suite_moments,
    "tableau-cov": suite_tableau_cov,
    "area": suite_area,
    "rows": suite_rows,
    "kiefer": suite_kiefer,
    "prelimit": suite_prelimit,
    "distance-decay": suite_distance_decay,
    "fernique": suite_fernique,
    "functionals": suite_functionals,
    "limit-consistency": suite_limit_consistency,
    "lyapounov": suite_lyapounov,
    "determinism": suite_determinism,
}


def resolve_suites(names: Sequence[str]) -> list[str]:
    """
    Expand ``all`` and check every name.

    Raises:
        UnknownSuiteError: If a name is not a known suite.
    """
    resolved: list[str] = []
    for name in names:
        if name == "all":
            resolved.extend(SUITES)
        elif name in SUITES:
            resolved.append(name)
        else:
            raise UnknownSuiteError(f"unknown suite '{name}'; choose from {', '.join(SUITES)} or all")
    return list(dict.fromkeys(resolved))


def run_verify(names: Sequence[str], opts: VerifyOptions) -> VerifyReport:
    """
    Run the named suites.

    With ``all``, size overrides (n, samples) are ignored so each suite runs
    at its own scale.

    Raises:
        UnknownSuiteError: Before anything runs, if a name is unknown.
    """
    suites = resolve_suites(names)
    if "all" in names:
        opts = opts.model_copy(update={"n": None, "samples": None})
    reports = []
    for name in suites:
        logger.info("Running suite %s", name)
        report = SuiteReport(suite=name, checks=SUITES[name](opts))
        logger.info("Suite %s: %s", name, "PASS" if report.passed else "FAIL")
        reports.append(report)
    return VerifyReport(suites=reports)
