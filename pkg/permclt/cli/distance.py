"""distance subcommand: Monte Carlo estimate of |E g(A) - E g(B)| between two path sources."""

import argparse
import logging

from permclt.cli.output import build_document, command_spec, common_options, emit, seed_of, workers_of
from permclt.schemas.run import build_run_config
from permclt.services import ensemble_service, matrix_service

logger = logging.getLogger(__name__)

SOURCES = ("y", "prelimit", "limit", "integral", "tableau")


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "distance",
        parents=[common_options()],
        help="|E g(A) - E g(B)| with pooled standard error",
    )
    parser.add_argument("--a", choices=SOURCES, default="y", help="first path source")
    parser.add_argument("--b", choices=SOURCES, default="prelimit", help="second path source")
    parser.add_argument("--functional", required=True, help="functional spec g")
    parser.add_argument("--n", type=int, required=True)
    parser.add_argument("--samples", type=int, required=True)
    parser.add_argument("--family", help="matrix family for y and prelimit (default exceedance)")
    parser.add_argument("--input", help="matrix file for y and prelimit")
    parser.add_argument("--mode", default="canonical")
    parser.add_argument("--kernel", default="tableau")
    parser.add_argument("--alpha", default="tableau")
    parser.add_argument("--method", choices=("exact", "factorized"), default="exact")
    parser.add_argument("--refine", type=int, default=4)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    """
    Estimate the distance between two sources on the same k/n grid.

    Both sources are driven by the same seed.

    Raises:
        ConfigError: On invalid sizes.
        GridMismatchError: If the sources disagree on n.
    """
    seed, workers = seed_of(args), workers_of(args)
    family = matrix_service.expand_family(args.family, args.n, seed) if args.family else None
    common = dict(
        n=args.n,
        samples=args.samples,
        seed=seed,
        workers=workers,
        family=family,
        input_path=args.input,
        mode=args.mode,
        kernel=args.kernel,
        alpha=args.alpha,
        prelimit_method=args.method,
        refine=args.refine,
        functionals=[args.functional],
    )
    cfg_a = build_run_config(source=args.a, **common)
    cfg_b = build_run_config(source=args.b, **common)
    source_a = ensemble_service.build_source(cfg_a)
    source_b = ensemble_service.build_source(cfg_b)
    estimate = ensemble_service.distance_estimate(cfg_a, args.functional, source_a, source_b)
    logger.info("distance %s vs %s: %.6g (se %.3g)", source_a.name, source_b.name, estimate.estimate, estimate.se)

    config = {**cfg_a.model_dump(), "source": None, "a": args.a, "b": args.b}
    document = build_document("distance", config, seed, workers, **estimate.as_dict())
    emit(command_spec(args), document)
    return 0
