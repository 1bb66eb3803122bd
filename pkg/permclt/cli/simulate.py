"""simulate subcommand: Monte Carlo ensembles of Y, pre-limit Z, limit Z or the tableau process."""

import argparse
import json
import logging
from pathlib import Path
from typing import Any

from permclt.cli.output import (
    Table,
    build_document,
    command_spec,
    common_options,
    emit,
    parse_grid,
    seed_of,
    workers_of,
)
from permclt.core.exceptions import ConfigError
from permclt.models.ensemble import EnsembleStats
from permclt.schemas.run import RunConfig, build_run_config, load_run_config
from permclt.services import ensemble_service

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "simulate",
        parents=[common_options()],
        help="ensemble means, covariances and functional expectations on a grid",
    )
    parser.add_argument("--source", choices=("y", "prelimit", "limit", "integral", "tableau"), default=None)
    parser.add_argument("--family", help="matrix family spec for the y and prelimit sources")
    parser.add_argument("--input", help="matrix file for the y and prelimit sources")
    parser.add_argument("--n", type=int, help="path resolution")
    parser.add_argument("--samples", type=int, help="ensemble size M")
    parser.add_argument("--grid", help="comma-separated evaluation times")
    parser.add_argument("--functional", action="append", default=None, help="functional spec (repeatable)")
    parser.add_argument("--mode", help="normalization mode")
    parser.add_argument("--kernel", help="limit kernel: tableau | bridge | zero | custom-grid:FILE")
    parser.add_argument("--alpha", help="alpha family for the integral source: tableau | constant")
    parser.add_argument("--method", choices=("exact", "factorized"), help="pre-limit sampler")
    parser.add_argument("--refine", type=int, help="integral sampler cells per grid step")
    parser.add_argument("--config", help="result document whose config block is re-run")
    parser.set_defaults(handler=run)


def _read_document(path: str) -> dict[str, Any]:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """
    RunConfig from flags, or from a previous result's config block.

    With --config only --workers may be overridden; the output does not
    depend on it.
    """
    if args.config:
        cfg = load_run_config(_read_document(args.config))
        if args.workers is not None:
            cfg = build_run_config(**{**cfg.model_dump(), "workers": args.workers})
        return cfg

    if args.n is None or args.samples is None:
        raise ConfigError("simulate needs --n and --samples (or --config)")
    values: dict[str, Any] = {
        "n": args.n,
        "samples": args.samples,
        "seed": seed_of(args),
        "workers": workers_of(args),
        "source": args.source or "y",
        "family": args.family,
        "input_path": args.input,
        "functionals": args.functional or [],
        "mode": args.mode,
        "kernel": args.kernel,
        "alpha": args.alpha,
        "prelimit_method": args.method,
        "refine": args.refine,
        "grid": parse_grid(args.grid),
    }
    return build_run_config(**{k: v for k, v in values.items() if v is not None})


def covariance_table(stats: EnsembleStats) -> Table:
    """(t, u, cov, se) rows over the upper triangle of the grid."""
    summary = stats.summary()
    grid = summary["grid"]
    cov = summary["covariances"]
    se = (summary["standard_errors"] or {}).get("covariances")
    rows = []
    for i, t in enumerate(grid):
        for j in range(i, len(grid)):
            rows.append([t, grid[j], None if cov is None else cov[i][j], None if se is None else se[i][j]])
    return ["t", "u", "cov", "se"], rows


def run(args: argparse.Namespace) -> int:
    """Run one ensemble and write its statistics."""
    cfg = resolve_config(args)
    stats = ensemble_service.run_ensemble(cfg)
    document = build_document("simulate", cfg.model_dump(), cfg.seed, cfg.workers, **stats.summary())
    emit(command_spec(args, cfg), document, covariance_table(stats))
    return 0
