"""Command-line entry point: gen-data, train, eval, export-alpha, plot."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields

from .datagen import IntegrationError
from .experiment import (
    ConfigError,
    ExperimentConfig,
    evaluate_saved,
    export_alpha,
    load_config,
    run_trials,
    write_dataset,
    write_reports,
)
from .plotting import MalformedCsv, plot_files
from .quantum import InvalidStateError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2
log = logging.getLogger("twiqrnn")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int, help="run a single seed instead of the seed list")
    for f in fields(ExperimentConfig):
        p.add_argument(f"--{f.name.replace('_', '-')}", dest=f"set_{f.name}", metavar=f.name.upper())


def _config_from(args) -> ExperimentConfig:
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("set_") and v is not None}
    if args.seed is not None:
        overrides["seeds"] = [args.seed]
    return load_config(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twiqrnn", description="Time-warp-invariant quantum recurrent models.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("gen-data", "write the task sequence CSV"),
        ("train", "train every seed, write per-trial reports and summary.json"),
        ("eval", "re-evaluate saved trial parameters"),
        ("export-alpha", "write known dc/dt next to the learnt gate probability"),
    ]:
        _add_config_flags(sub.add_parser(name, help=help_))
    p = sub.add_parser("plot", help="render cumulative-loss curves from report CSVs to SVG")
    p.add_argument("files", nargs="+")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--title", default="cumulative loss")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "plot":
            print(plot_files(args.files, args.output, args.title))
            return EXIT_OK
        cfg = _config_from(args)
        if args.command == "gen-data":
            print(write_dataset(cfg))
        elif args.command == "train":
            summary = write_reports(cfg, run_trials(cfg))
            print(cfg.output_dir() / cfg.tag / "summary.json")
            if not summary["complete"]:
                log.error("trials failed: %s", summary["failed_seeds"])
                return EXIT_NUMERIC
        elif args.command == "eval":
            for path in evaluate_saved(cfg):
                print(path)
        elif args.command == "export-alpha":
            for path in export_alpha(cfg):
                print(path)
    except (ConfigError, MalformedCsv, FileNotFoundError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (FloatingPointError, IntegrationError, ArithmeticError, InvalidStateError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
