"""Command-line entry point: ``trps <verb> [options]``.

Verbs ``dynamics``, ``spectrum``, ``scan`` and ``bench`` run that task from
``--config``; ``preset <name>`` runs a catalog entry; ``validate <config>``
only checks a config. Exit codes: 0 success, 2 config error, 3 numerical
invariant violation, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, config_from_dict, load_config
from .presets import CATALOG, preset_config
from .runner import InvariantViolation, RunResult, run_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_IO = 4

log = logging.getLogger("trps")


def run_preset(name: str, out_dir=None, fmt=None, threads: int = 1, seedless: bool = False) -> RunResult:
    try:
        data = preset_config(name)
    except KeyError as exc:
        raise ConfigError(exc.args[0], "preset") from None
    return run_config(config_from_dict(data), out_dir, fmt, threads, seedless)


def run_custom(path, out_dir=None, fmt=None, threads: int = 1, seedless: bool = False, tasks=None) -> RunResult:
    return run_config(load_config(path), out_dir, fmt, threads, seedless, tasks)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--format", choices=("csv", "json"), help="table format")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sensor frequencies")
    common.add_argument(
        "--seedless", action="store_true", help="fail if any random number generator is touched"
    )
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="trps", description="Population dynamics and time-resolved spectra of the three-cavity model."
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, text in (
        ("dynamics", "population time series"),
        ("spectrum", "time-resolved spectra"),
        ("scan", "parameter scan of population dynamics"),
        ("bench", "runtime scaling benchmark"),
    ):
        sub.add_parser(verb, parents=[common], help=text)
    p = sub.add_parser("preset", parents=[common], help="run a catalog preset")
    p.add_argument("name", help=f"one of: {', '.join(CATALOG)}")
    v = sub.add_parser("validate", parents=[common], help="check a config without running it")
    v.add_argument("path", nargs="?", help="config file (or use --config)")
    return parser


def _dispatch(args) -> RunResult | None:
    opts = dict(out_dir=args.out, fmt=args.format, threads=args.threads, seedless=args.seedless)
    if args.verb == "preset":
        return run_preset(args.name, **opts)
    if args.verb == "validate":
        path = args.path or args.config
        if not path:
            raise ConfigError("validate needs a config path")
        cfg = load_config(path)
        print(f"{path}: valid ({cfg.preset}, tasks: {', '.join(cfg.tasks)})")
        return None
    if args.verb == "bench" and not args.config:
        return run_preset("bench-fig7", **opts)
    if not args.config:
        raise ConfigError(f"'{args.verb}' needs --config")
    return run_custom(args.config, tasks=[args.verb], **opts)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if result is not None:
        for w in result.warnings:
            print(f"warning: {w}", file=sys.stderr)
        for f in result.files:
            log.info("wrote %s", Path(f))
    return EXIT_OK
