"""Command-line entry point: one subcommand per experiment kind."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import KINDS, ConfigError, load_config_file, validate_config

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

log = logging.getLogger("nhqrc")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nhqrc", description="Non-Hermitian quantum reservoir experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="kind", required=True, metavar="experiment")
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", help="YAML or JSON experiment file")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="master seed, unsigned 64-bit (overrides config)")
        p.add_argument("--ensemble", type=int, help="number of realizations (overrides config)")
        p.add_argument("--workers", type=int, help="worker processes (default: $NHQRC_WORKERS or CPU count)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; those are configuration errors here
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    try:
        raw = load_config_file(args.config) if args.config else {}
        for key in ("out", "seed", "ensemble"):
            value = getattr(args, key)
            if value is not None:
                raw[key] = value
        cfg = validate_config(raw, kind=args.kind)
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers", "must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    from .experiments import run_experiment

    try:
        manifest = run_experiment(cfg, workers=args.workers)
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        log.debug("run failed", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {len(manifest.files)} files to {cfg.out if args.out is None else args.out}")
    for name, digest in sorted(manifest.files.items()):
        print(f"  {name}  sha256={digest[:16]}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
