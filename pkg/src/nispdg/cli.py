"""Command-line interface: run, sweep, and validate subcommands.

Exit codes: 0 success, 1 configuration/usage error, 2 solver failure,
3 validation failure (a configured oracle reports effectivity below one).
"""

from __future__ import annotations

import argparse
import sys

from .config import parse_config, serialize_config
from .errors import ConfigError, NispDgError
from .runner import dry_run_checks, run_single, run_sweep


def _load_config(path: str):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    return parse_config(text)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="nispdg",
        description=(
            "RKDG + non-intrusive spectral projection solver for 1D random "
            "conservation laws with computable a posteriori error bounds"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="path to an INI run configuration")
    common.add_argument("--out-dir", default=None, help="output directory (default: config, then $NISPDG_OUT_DIR)")
    common.add_argument("--quiet", action="store_true", help="suppress table output")

    sub.add_parser("run", parents=[common], help="run one configuration")

    sweep = sub.add_parser("sweep", parents=[common], help="sweep one axis over values")
    sweep.add_argument("--axis", required=True, choices=("N_x", "M", "R"))
    sweep.add_argument("--values", required=True, help="comma-separated increasing integers")
    sweep.add_argument("--workers", type=int, default=1)

    sub.add_parser("validate", parents=[common], help="parse and echo the configuration")

    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if args.command == "validate":
        try:
            checks = dry_run_checks(cfg)
        except NispDgError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        if not args.quiet:
            print(serialize_config(cfg), end="")
            for line in checks:
                print(f"check: {line}")
        return 0

    try:
        if args.command == "run":
            result = run_single(cfg, out_dir=args.out_dir, quiet=args.quiet)
            return result.exit_code
        values = [int(v) for v in args.values.split(",") if v.strip()]
        sweep_out = run_sweep(
            cfg, args.axis, values, out_dir=args.out_dir,
            workers=args.workers, quiet=args.quiet,
        )
        if sweep_out["failed"] is not None:
            print(f"sweep aborted: run {sweep_out['failed']} failed", file=sys.stderr)
            return 2
        return 0
    except NispDgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
