"""matrix subcommand: load or generate a score matrix and report its normalizations."""

import argparse
import logging
from typing import Optional

import numpy as np

from permclt.cli.output import (
    build_document,
    command_spec,
    common_options,
    emit,
    matrix_table,
    seed_of,
    workers_of,
)
from permclt.core.exceptions import ZeroMatrixError
from permclt.models.score import NormalizationMode
from permclt.services import matrix_service, tableau_service

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "matrix",
        parents=[common_options()],
        help="centered matrix, s(a), Lambda(a), sigma and f_n/g_n",
    )
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--family", help="exceedance | uniform | bernoulli | additive, or a full spec")
    source.add_argument("--input", help="CSV or JSON matrix file")
    parser.add_argument("--n", type=int, help="size for a bare family name")
    parser.add_argument("--p", type=float, default=0.5, help="bernoulli probability")
    parser.add_argument("--mode", choices=[m.value for m in NormalizationMode], default="canonical")
    parser.add_argument("--s", type=float, help="scale for --mode custom")
    parser.add_argument("--summary", action="store_true", help="omit the n x n and (n+1) x (n+1) tables")
    parser.set_defaults(handler=run)


def _exceedance_size(family: Optional[str]) -> Optional[int]:
    """n of an ``exceedance:n`` spec with n >= 2, else None."""
    if family is None:
        return None
    name, _, size = family.partition(":")
    if name != "exceedance" or not size.isdigit() or int(size) < 2:
        return None
    return int(size)


def _streamed_exceedance(n: int, mode: NormalizationMode, s: Optional[float]) -> dict:
    """Summary payload for the exceedance family from row sums alone."""
    sum_sq, sum_cube = tableau_service.exceedance_sums(n)
    tilde_sq, tilde_cube = tableau_service.exceedance_tilde_sums(n)
    scales = {
        NormalizationMode.CANONICAL.value: float(np.sqrt(sum_sq / (n - 1))),
        NormalizationMode.TILDE.value: float(np.sqrt(tilde_sq / (n - 1))),
        NormalizationMode.SIMPLE.value: float(np.sqrt(sum_sq / n)),
    }
    if mode is NormalizationMode.CUSTOM:
        selected = matrix_service.custom_normalization(s).s
    else:
        selected = scales[mode.value]
    scales["selected"] = selected
    ratio = sum_cube / (n * selected**3)
    s_tilde = scales[NormalizationMode.TILDE.value]
    return {
        "n": n,
        "s": scales,
        "lambda": ratio,
        "lambda_sqrt_n": ratio * n**0.5,
        "lambda_tilde": tilde_cube / (n * s_tilde**3),
        "notes": [],
    }


def run(args: argparse.Namespace) -> int:
    """
    Build the matrix report.

    With ``--summary`` the exceedance family is summarized from row sums,
    without the n x n matrix.

    Args:
        args: Parsed arguments.

    Returns:
        Exit code 0.

    Raises:
        ParseError: On unreadable input or bad family specs.
        ZeroMatrixError: If the requested mode's scale vanishes.
    """
    seed = seed_of(args)
    family = matrix_service.expand_family(args.family, args.n, seed, args.p) if args.family else None
    mode = NormalizationMode(args.mode)
    size = _exceedance_size(family)
    config = {"family": family, "input": args.input, "mode": mode.value, "s": args.s}

    if args.summary and size is not None:
        payload = _streamed_exceedance(size, mode, args.s)
        logger.info(
            "n=%d mode=%s s=%.6g Lambda=%.6g (streamed)", size, mode.value, payload["s"]["selected"], payload["lambda"]
        )
        document = build_document("matrix", config, seed, workers_of(args), **payload)
        emit(command_spec(args), document)
        return 0

    m = matrix_service.resolve_matrix(family, args.input)
    norm = matrix_service.normalization(m, mode, args.s)

    scales = {}
    notes = []
    for each in (NormalizationMode.CANONICAL, NormalizationMode.TILDE, NormalizationMode.SIMPLE):
        try:
            scales[each.value] = matrix_service.normalization(m, each).s
        except ZeroMatrixError as exc:
            scales[each.value] = None
            notes.append(str(exc))
    scales["selected"] = norm.s

    try:
        lambda_tilde = matrix_service.lyapounov_tilde(m)
    except ZeroMatrixError:
        lambda_tilde = None
    ratio = matrix_service.lyapounov_ratio(m, norm)
    logger.info("n=%d mode=%s s=%.6g Lambda=%.6g", m.n, norm.mode.value, norm.s, ratio)

    payload = {
        "n": m.n,
        "s": scales,
        "lambda": ratio,
        "lambda_sqrt_n": ratio * m.n**0.5,
        "lambda_tilde": lambda_tilde,
        "notes": notes,
    }
    table = None
    if not args.summary:
        sigma = matrix_service.sigma_matrix(m, norm)
        fn, gn = matrix_service.empirical_fn_gn(m, norm)
        payload.update(a=m.a, sigma=sigma.sigma, fn=fn, gn=gn)
        table = matrix_table(sigma.sigma)

    document = build_document("matrix", config, seed, workers_of(args), **payload)
    emit(command_spec(args), document, table)
    return 0
