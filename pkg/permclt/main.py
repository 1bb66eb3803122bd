"""Command-line entry point."""

import argparse
import logging
import sys
from typing import Optional, Sequence

from permclt.cli import distance, gaussian, matrix, simulate, tableaux, verify
from permclt.core.config import settings
from permclt.core.exceptions import PermCLTError

logger = logging.getLogger(__name__)

COMMANDS = (matrix, simulate, verify, gaussian, tableaux, distance)


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    """Send log records to stderr in the project's format."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="permclt",
        description=f"{settings.APP_NAME} {settings.APP_VERSION}: permutation-sum processes, "
        "their Gaussian surrogates and verification suites",
    )
    parser.add_argument("--version", action="version", version=settings.APP_VERSION)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments and run one subcommand.

    Returns:
        0 on success, 1 if a verification check failed, 2 on usage,
        configuration, parse or domain errors.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.quiet)

    try:
        return args.handler(args)
    except PermCLTError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
