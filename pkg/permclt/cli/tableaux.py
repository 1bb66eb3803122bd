"""tableaux subcommand: weak-exceedance record, boundary and exact moments of one permutation."""

import argparse
import logging
from typing import Optional

import numpy as np

from permclt.cli.output import build_document, command_spec, common_options, emit, seed_of, workers_of
from permclt.core.exceptions import ConfigError
from permclt.core.rng import LANE_SECONDARY, substream
from permclt.services import ensemble_service, tableau_service

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "tableaux",
        parents=[common_options()],
        help="exceedance statistics, tableau boundary and distance to the limit arc",
    )
    parser.add_argument("--n", type=int, help="permutation size (ignored with --perm)")
    parser.add_argument("--perm", help="comma-separated 1-based permutation (random when omitted)")
    parser.add_argument("--samples", type=int, default=0, help="random permutations for the mean arc distance")
    parser.add_argument("--i", type=int, default=1, help="first index for exact moments")
    parser.add_argument("--j", type=int, default=2, help="second index for exact moments")
    parser.add_argument("--k", type=int, help="partial-sum index for exact moments (default n/2)")
    parser.set_defaults(handler=run)


def _permutation(args: argparse.Namespace, seed: int) -> np.ndarray:
    if args.perm:
        try:
            return np.array([int(p) for p in args.perm.split(",") if p.strip()], dtype=np.int64)
        except ValueError as exc:
            raise ConfigError(f"bad permutation '{args.perm}': {exc}") from exc
    if args.n is None:
        raise ConfigError("tableaux needs --n or --perm")
    return ensemble_service.random_permutation(args.n, substream(seed, 0, LANE_SECONDARY))


def sup_distances(n: int, samples: int, seed: int, workers: int) -> np.ndarray:
    """Distance of the scaled boundary to the limit arc for ``samples`` random permutations."""

    def chunk(rng: np.random.Generator, size: int) -> np.ndarray:
        batch = tableau_service.exceedance_batch(ensemble_service.random_permutations(n, size, rng))
        return np.array([tableau_service.parabola_distance(tableau_service.boundary_from_s0(row)) for row in batch.s0])

    return np.concatenate(ensemble_service.map_chunks(samples, seed, workers, chunk))


def _fractions(moments: dict) -> dict:
    return {key: {"exact": str(value), "value": float(value)} for key, value in moments.items()}


def _mc_summary(n: int, samples: int, seed: int, workers: int) -> Optional[dict]:
    if samples <= 0:
        return None
    distances = sup_distances(n, samples, seed, workers)
    mean = float(distances.mean())
    threshold = 5.0 / np.sqrt(n)
    return {
        "samples": samples,
        "mean_distance": mean,
        "max_distance": float(distances.max()),
        "threshold": threshold,
        "within_threshold": bool(mean <= threshold),
    }


def run(args: argparse.Namespace) -> int:
    """
    Report one permutation's tableau statistics.

    Raises:
        InvalidPermutationError: If --perm is not a permutation of 1..n.
        IndexOrderError: If --i >= --j.
        RangeError: If an index is out of range.
    """
    seed, workers = seed_of(args), workers_of(args)
    perm = _permutation(args, seed)
    record = tableau_service.exceedance_record(perm)
    n = record.n
    if n < 2:
        raise ConfigError("tableaux needs n >= 2")
    k = n // 2 if args.k is None else args.k

    poly = tableau_service.boundary(record)
    payload = {
        "n": n,
        "permutation": record.permutation,
        "indicators": record.indicators,
        "s0": record.s0.values,
        "y_hat": record.y_hat.values,
        "rows": record.rows,
        "area": record.area,
        "boundary": poly.points,
        "parabola_distance": tableau_service.parabola_distance(poly),
        "boundary_approximation": tableau_service.boundary_approximation(record),
        "yn_deviation": tableau_service.yn_deviation(n, perm),
        "exact_moments": _fractions(tableau_service.exact_moments(n, args.i, args.j, k)),
        "exact_row_variance": float(tableau_service.exact_row_variance(n)),
        "exact_area_mean": float(tableau_service.exact_area_mean(n)),
        "monte_carlo": _mc_summary(n, args.samples, seed, workers),
    }
    logger.info("tableau n=%d rows=%d area=%d", n, record.rows, record.area)

    config = {"n": n, "perm": args.perm, "samples": args.samples, "i": args.i, "j": args.j, "k": k}
    scaled = poly.scaled()
    table = (["l", "x", "y", "x_scaled", "y_scaled"], [[l, *poly.points[l], *scaled[l]] for l in range(n + 1)])
    emit(command_spec(args), build_document("tableaux", config, seed, workers, **payload), table)
    return 0
