"""Shared CLI plumbing: global flags, result documents and JSON/CSV writers."""

import argparse
import csv
import io
import logging
import sys
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from permclt.core.config import settings
from permclt.core.exceptions import ConfigError
from permclt.schemas.result import Metadata, ResultDocument
from permclt.schemas.run import CommandSpec, RunConfig

logger = logging.getLogger(__name__)

Table = tuple[Sequence[str], Iterable[Sequence[Any]]]


def common_options() -> argparse.ArgumentParser:
    """Parent parser carrying the flags every subcommand accepts."""
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--seed", type=int, default=None, help=f"root seed (default {settings.DEFAULT_SEED})")
    parent.add_argument("--workers", type=int, default=None, help="worker threads (default PERMCLT_WORKERS or 1)")
    parent.add_argument("--out", default=None, help="output file (default stdout)")
    parent.add_argument("--format", choices=("json", "csv"), default="json", help="output format")
    return parent


def seed_of(args: argparse.Namespace) -> int:
    return settings.DEFAULT_SEED if args.seed is None else args.seed


def workers_of(args: argparse.Namespace) -> int:
    return settings.WORKERS if args.workers is None else args.workers


def jsonable(value: Any) -> Any:
    """Convert numpy containers and scalars to plain Python for serialization."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    return value


def build_document(
    command: str,
    config: dict[str, Any],
    seed: int,
    workers: int,
    **payload: Any,
) -> ResultDocument:
    """Assemble the shared result document around a command payload."""
    return ResultDocument(
        command=command,
        config=jsonable(config),
        metadata=Metadata.for_run(seed, workers),
        **{key: jsonable(value) for key, value in payload.items()},
    )


def _write(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    logger.info("Wrote %s", path)


def csv_text(table: Table) -> str:
    header, rows = table
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else v for v in jsonable(list(row))])
    return buffer.getvalue()


_PLUMBING = frozenset({"handler", "command", "out", "format", "verbose", "quiet"})


def command_spec(args: argparse.Namespace, config: Optional[RunConfig] = None) -> CommandSpec:
    """Resolve a parsed invocation into its subcommand, inputs and output target."""
    inputs = {key: value for key, value in vars(args).items() if key not in _PLUMBING and value is not None}
    spec = CommandSpec(subcommand=args.command, inputs=inputs, config=config, out=args.out, format=args.format)
    logger.debug("Resolved %s with inputs %s", spec.subcommand, sorted(spec.inputs))
    return spec


def emit(spec: CommandSpec, document: ResultDocument, table: Optional[Table] = None) -> None:
    """
    Write the result in the requested format.

    CSV output writes the command's plot-ready table; commands without
    one fall back to JSON.
    """
    if spec.format == "csv" and table is not None:
        _write(csv_text(table), spec.out)
    else:
        if spec.format == "csv":
            logger.warning("Command %s has no CSV table; writing JSON", document.command)
        _write(document.to_json(), spec.out)


def matrix_table(matrix: np.ndarray) -> Table:
    """Square matrix as CSV rows with a column-index header."""
    matrix = np.asarray(matrix)
    return [f"c{j + 1}" for j in range(matrix.shape[1])], matrix.tolist()


def path_table(times: Sequence[float], paths: np.ndarray) -> Table:
    """(t, path_1, path_2, ...) columns."""
    paths = np.atleast_2d(paths)
    header = ["t"] + [f"path_{k + 1}" for k in range(paths.shape[0])]
    return header, [[t, *paths[:, i].tolist()] for i, t in enumerate(times)]


def parse_grid(text: Optional[str]) -> Optional[list[float]]:
    """Comma-separated times, or None."""
    if text is None:
        return None
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid '{text}': {exc}") from exc
