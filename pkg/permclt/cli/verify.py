"""verify subcommand: run acceptance suites and report each check."""

import argparse
import logging
import sys

from permclt.cli.output import build_document, command_spec, common_options, emit, seed_of, workers_of
from permclt.schemas.run import build_verify_options
from permclt.services import verify_service

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "verify",
        parents=[common_options()],
        help=f"run suites: {', '.join(verify_service.SUITES)} or all",
    )
    parser.add_argument(
        "--suite",
        action="append",
        required=True,
        help="suite name, comma list or 'all' (repeatable)",
    )
    parser.add_argument("--n", type=int, help="override the suite's size")
    parser.add_argument("--samples", type=int, help="override the suite's ensemble size")
    parser.add_argument("--trials", type=int, default=20, help="random matrices per size (exact-cov)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    """
    Run the selected suites.

    The JSON report goes to --out or stdout, the human table to stderr.

    Returns:
        0 if every check passed, 1 otherwise.

    Raises:
        UnknownSuiteError: If a suite name is unknown.
        ConfigError: On invalid sizes.
    """
    names = [part.strip() for item in args.suite for part in item.split(",") if part.strip()]
    seed, workers = seed_of(args), workers_of(args)
    opts = build_verify_options(n=args.n, samples=args.samples, trials=args.trials, seed=seed, workers=workers)
    report = verify_service.run_verify(names, opts)

    config = {"suites": names, **opts.model_dump()}
    rows = [
        [s.suite, c.name, c.target, c.estimate, c.se, c.tolerance, c.passed]
        for s in report.suites
        for c in s.checks
    ]
    document = build_document("verify", config, seed, workers, **report.summary())
    emit(command_spec(args), document, (["suite", "check", "target", "estimate", "se", "tolerance", "passed"], rows))
    print(report.table(), file=sys.stderr)
    return 0 if report.passed else 1
