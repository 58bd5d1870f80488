"""Command line entry point.

Experiment commands write results into ``--out`` directories; ``serve``
runs the HTTP session service. Exit codes: 0 ok, 2 config error,
3 numeric failure, 4 io error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .domain import ConfigError, NumericError
from .harness import (
    config_from_payload,
    load_config_file,
    run_bo,
    run_fit_eval,
    run_generate_data,
    run_select_dim,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

_RUNNERS = {
    "generate-data": run_generate_data,
    "fit-eval": run_fit_eval,
    "bo-run": run_bo,
    "select-dim": run_select_dim,
}

_HELP = {
    "generate-data": "simulate a choice dataset from a named objective",
    "fit-eval": "accuracy table for choice-trained models and the oracle",
    "bo-run": "closed-loop optimisation curves with the Sobol baseline",
    "select-dim": "latent-dimension search table over repetitions",
    "serve": "run the HTTP session service",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="choicebo",
        description="Preference-driven multi-objective optimisation experiments.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        type=Path,
        help="JSON parameter file; a previous run's config.json also works",
    )
    common.add_argument("--seed", type=int, help="experiment seed (mandatory)")
    common.add_argument("--out", type=Path, help="results directory")
    common.add_argument(
        "--force", action="store_true", help="write into a non-empty results directory"
    )
    common.add_argument(
        "--paper-scale",
        action="store_true",
        help="restore the published experiment budgets instead of desk-scale ones",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        subparsers.add_parser(name, parents=[common], help=_HELP[name])
    serve_parser = subparsers.add_parser("serve", parents=[common], help=_HELP["serve"])
    serve_parser.add_argument(
        "--bind", help="HOST:PORT (default CHOICEBO_BIND_ADDR or 127.0.0.1:8000)"
    )
    serve_parser.add_argument(
        "--data-dir", type=Path, help="session store (default CHOICEBO_DATA_DIR)"
    )
    return parser


def _run_serve(args: argparse.Namespace) -> int:
    from .service import serve

    params = {}
    if args.config is not None:
        params, _, _ = load_config_file(args.config, "serve")
    serve(
        bind=args.bind or params.get("bind"),
        data_dir=args.data_dir or params.get("data_dir"),
    )
    return EXIT_OK


def _run_experiment(args: argparse.Namespace) -> int:
    params: dict = {}
    file_seed = file_scale = None
    if args.config is not None:
        params, file_seed, file_scale = load_config_file(args.config, args.command)
    seed = args.seed if args.seed is not None else file_seed
    if seed is None:
        raise ConfigError("a seed is required: pass --seed or put one in the config file")
    if args.out is None:
        raise ConfigError("--out DIR is required")
    paper_scale = bool(args.paper_scale or file_scale)
    config = config_from_payload(args.command, params)
    summary = _RUNNERS[args.command](
        config, args.out, seed=int(seed), force=args.force, paper_scale=paper_scale
    )
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    print()
    return EXIT_OK


def main(argv: "list[str] | None" = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return _run_serve(args)
        return _run_experiment(args)
    except (NumericError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
