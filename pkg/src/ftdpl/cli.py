"""
Command-line entry point.

Usage::

    ftdpl run-regret --config c.toml --set T=300 --seed 7
    ftdpl validate-config --config c.toml

Exit status: 0 on success, 1 on configuration errors, 2 on runtime failures.
The output directory resolves as ``--output-dir`` > ``--set output_dir=..``
> config file > ``$FTDPL_OUTPUT_DIR`` > built-in default.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from .config import ConfigError, ExperimentConfig, apply_overrides, load_config
from .core import DomainError, ParameterError

COMMANDS = ("run-regret", "run-oos", "run-ident", "gen-data", "validate-config")
_EXPERIMENT = {"run-regret": "regret", "run-oos": "oos", "run-ident": "ident", "gen-data": "gen-data"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ftdpl", description=__doc__.split("\n\n")[0])
    parser.add_argument("subcommand", choices=COMMANDS)
    parser.add_argument("--config", help="TOML configuration file")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. T=300 or solver.generations=40")
    parser.add_argument("--output-dir", help="output directory")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _load(args, environ):
    environ = os.environ if environ is None else environ
    base = ExperimentConfig()
    if environ.get("FTDPL_OUTPUT_DIR"):
        base = replace(base, output_dir=environ["FTDPL_OUTPUT_DIR"])
    if args.config:
        base = load_config(args.config, base)
    cfg = apply_overrides(base, args.overrides)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if args.output_dir:
        cfg = replace(cfg, output_dir=args.output_dir)
    return cfg


def main(argv=None, environ=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        cfg = _load(args, environ)
        cfg.validate(_EXPERIMENT.get(args.subcommand))
    except ConfigError as exc:
        print(f"ftdpl: configuration error: {exc}", file=sys.stderr)
        return 1
    if args.subcommand == "validate-config":
        print("configuration OK")
        return 0

    from . import experiments

    dispatch = {
        "run-regret": experiments.regret_experiment,
        "run-oos": experiments.oos_experiment,
        "run-ident": experiments.identification_experiment,
        "gen-data": experiments.generate_data,
    }
    try:
        dispatch[args.subcommand](cfg)
    except (ConfigError, ParameterError) as exc:
        print(f"ftdpl: configuration error: {exc}", file=sys.stderr)
        return 1
    except (DomainError, OSError, ArithmeticError, RuntimeError) as exc:
        print(f"ftdpl: run failed: {exc}", file=sys.stderr)
        return 2
    print(f"results written to {cfg.output_dir}")
    return 0


def run():  # pragma: no cover
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    run()
