"""Command line entry point: ``qsl run`` and ``qsl validate``."""

from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path

from .errors import ConfigError, QslError
from .runner import load_config, run

EXIT_OK, EXIT_VALIDATION, EXIT_COMPUTE, EXIT_IO = 0, 1, 2, 3


def _provenance(exc: BaseException) -> str:
    # innermost frame inside this package names the failing module
    for frame in reversed(traceback.extract_tb(exc.__traceback__)):
        parts = Path(frame.filename).parts
        if "qsl" in parts:
            return "qsl." + Path(frame.filename).stem
    return type(exc).__module__


def _load(path: str):
    try:
        return load_config(path)
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"invalid config {path}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def cmd_validate(args) -> int:
    cfg = _load(args.config)
    if isinstance(cfg, int):
        return cfg
    print(f"{args.config}: ok ({cfg.experiment})")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load(args.config)
    if isinstance(cfg, int):
        return cfg
    try:
        _, written = run(cfg, out_dir=args.out, emit_plot=args.emit_plot)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (QslError, ArithmeticError, ValueError) as exc:
        print(f"compute error in {_provenance(exc)}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    for path in written:
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment and write CSV results")
    p_run.add_argument("config", help="TOML run description")
    p_run.add_argument("--out", help="output directory (overrides [output] dir)")
    p_run.add_argument("--emit-plot", action="store_true", help="also write a matplotlib script for the CSVs")
    p_run.set_defaults(func=cmd_run)
    p_val = sub.add_parser("validate", help="parse and validate a config without running it")
    p_val.add_argument("config")
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
