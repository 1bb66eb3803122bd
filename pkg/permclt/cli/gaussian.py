"""gaussian subcommand: limit kernels, Gaussian samplers and regularity checks."""

import argparse
import logging

import numpy as np

from permclt.cli.output import (
    build_document,
    command_spec,
    common_options,
    emit,
    matrix_table,
    path_table,
    seed_of,
    workers_of,
)
from permclt.core.exceptions import ConfigError
from permclt.core.rng import substream
from permclt.services import gaussian_service, matrix_service

logger = logging.getLogger(__name__)

ACTIONS = ("kernel", "sample", "integral", "kiefer", "fernique", "alpha", "prelimit", "split")


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "gaussian",
        parents=[common_options()],
        help="kernel matrices and factors, limit/pre-limit/Kiefer samples, Fernique check",
    )
    parser.add_argument("action", choices=ACTIONS)
    parser.add_argument("--kernel", default="tableau", help="tableau | bridge | zero | custom-grid:FILE")
    parser.add_argument("--m", type=int, default=32, help="grid resolution k/m")
    parser.add_argument("--paths", type=int, default=1, help="number of sampled paths")
    parser.add_argument("--alpha", default="tableau", help="alpha family: tableau | constant")
    parser.add_argument("--n", type=int, default=100, help="matrix size for alpha and pre-limit actions")
    parser.add_argument("--refine", type=int, default=4, help="integral cells per grid step")
    parser.add_argument("--beta", type=float, default=1.0, help="Fernique exponent in (0, 2]")
    parser.add_argument("--family", help="matrix family for pre-limit actions (default exceedance)")
    parser.add_argument("--input", help="matrix file for pre-limit actions")
    parser.add_argument("--mode", default="canonical", help="normalization mode for pre-limit actions")
    parser.set_defaults(handler=run)


def _check_counts(args: argparse.Namespace) -> None:
    if args.m < 1 or args.paths < 1 or args.n < 2 or args.refine < 1:
        raise ConfigError("--m, --paths and --refine must be >= 1 and --n >= 2")


def _kernel(args: argparse.Namespace, seed: int):
    kernel = gaussian_service.parse_kernel(args.kernel)
    grid = np.arange(args.m + 1) / args.m
    sigma = kernel.matrix(grid)
    factor = gaussian_service.kernel_factor(kernel, grid)
    payload = {"kernel": kernel.name, "grid": grid, "sigma": sigma, "factorization": factor.describe()}
    return payload, matrix_table(sigma)


def _sample(args: argparse.Namespace, seed: int):
    kernel = gaussian_service.parse_kernel(args.kernel)
    grid = np.arange(args.m + 1) / args.m
    paths = gaussian_service.sample_limit_batch(kernel, grid, substream(seed), args.paths)
    payload = {
        "kernel": kernel.name,
        "grid": grid,
        "paths": paths,
        "factorization": gaussian_service.kernel_factor(kernel, grid).describe(),
    }
    return payload, path_table(grid, paths)


def _integral(args: argparse.Namespace, seed: int):
    fam = gaussian_service.parse_alpha_family(args.alpha, args.n)
    grid = np.arange(args.m + 1) / args.m
    paths = gaussian_service.sample_limit_integral_batch(fam, args.m, substream(seed), args.paths, args.refine)
    payload = {
        "alpha": fam.name,
        "grid": grid,
        "paths": paths,
        "covariance": gaussian_service.integral_covariance(fam, args.m, args.refine),
    }
    return payload, path_table(grid, paths)


def _kiefer(args: argparse.Namespace, seed: int):
    fields = gaussian_service.sample_kiefer(args.m, args.m, substream(seed), args.paths)
    grid = np.arange(args.m + 1) / args.m
    return {"grid": grid, "fields": fields}, matrix_table(fields[0])


def _fernique(args: argparse.Namespace, seed: int):
    kernel = gaussian_service.parse_kernel(args.kernel)
    c_g = gaussian_service.fernique_check(kernel, args.beta)
    payload = {
        "kernel": kernel.name,
        "beta": args.beta,
        "c_g_squared": None if np.isinf(c_g) else c_g,
        "diverges": bool(np.isinf(c_g)),
    }
    return payload, None


def _alpha(args: argparse.Namespace, seed: int):
    fam = gaussian_service.parse_alpha_family(args.alpha, args.n)
    payload = {
        "alpha": fam.name,
        "n": fam.n,
        "norm2": fam.norm2,
        "norm_inf": fam.norm_inf,
        "alpha_plus": fam.alpha_plus,
        "eps_norm2": fam.eps_norm2,
        "eps_tilde_norm2": fam.eps_tilde_norm2,
    }
    return payload, None


def _model(args: argparse.Namespace, seed: int):
    family = matrix_service.expand_family(args.family or "exceedance", args.n, seed) if args.input is None else None
    m = matrix_service.resolve_matrix(family, args.input)
    return gaussian_service.prelimit_model(m, matrix_service.normalization(m, args.mode))


def _prelimit(args: argparse.Namespace, seed: int):
    model = _model(args, seed)
    paths = gaussian_service.sample_prelimit_batch(model, substream(seed), args.paths)
    grid = np.arange(model.n + 1) / model.n
    return {"n": model.n, "grid": grid, "paths": paths}, path_table(grid, paths)


def _split(args: argparse.Namespace, seed: int):
    model = _model(args, seed)
    first, second = gaussian_service.sample_prelimit_split_batch(model, substream(seed), args.paths)
    grid = np.arange(model.n + 1) / model.n
    payload = {"n": model.n, "grid": grid, "first": first, "second": second, "paths": first - second}
    return payload, path_table(grid, first - second)


_HANDLERS = {
    "kernel": _kernel,
    "sample": _sample,
    "integral": _integral,
    "kiefer": _kiefer,
    "fernique": _fernique,
    "alpha": _alpha,
    "prelimit": _prelimit,
    "split": _split,
}


def run(args: argparse.Namespace) -> int:
    """Dispatch one gaussian action and write its output."""
    _check_counts(args)
    seed = seed_of(args)
    payload, table = _HANDLERS[args.action](args, seed)
    logger.info("gaussian %s done", args.action)
    config = {
        "action": args.action,
        "kernel": args.kernel,
        "alpha": args.alpha,
        "m": args.m,
        "n": args.n,
        "paths": args.paths,
        "refine": args.refine,
        "beta": args.beta,
        "family": args.family,
        "input": args.input,
        "mode": args.mode,
    }
    emit(command_spec(args), build_document("gaussian", config, seed, workers_of(args), **payload), table)
    return 0
