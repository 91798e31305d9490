"""Command line entry point: ``limitperiodic <kind> --config run.ini``.

Exit status is 0 when every certificate passes, 1 when one fails (the
manifest is still written) and 2 when the configuration is rejected.
"""

from __future__ import annotations

import argparse
import sys

from .config import KINDS, OUT_ENV, apply_overrides, load_config, validate_config
from .runner import run

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="limitperiodic", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run the {kind} experiment")
        sp.add_argument("--config", metavar="PATH", help="INI run configuration")
        sp.add_argument("--out", metavar="DIR", help=f"output directory (default ${OUT_ENV} or ./results)")
        sp.add_argument("--seed", type=int, help="seed for randomized parts")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for independent items")
        sp.add_argument(
            "--override", action="append", default=[], metavar="KEY=VALUE",
            help="set section.key in the configuration (repeatable)",
        )
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = [f"run.kind={args.kind}"] + list(args.override)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.config:
        cfg, errors = load_config(args.config, overrides)
    else:
        try:
            cfg, errors = validate_config(apply_overrides("", overrides))
        except ValueError as exc:
            cfg, errors = None, [f"override: {exc}"]
    if errors:
        for e in errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    manifest = run(cfg, args.out, threads=args.threads)
    for e in manifest.errors:
        print(f"error: {e}", file=sys.stderr)
    print(f"{cfg.kind}: {'pass' if manifest.passed else 'FAIL'} ({len(manifest.files)} files)")
    return EXIT_OK if manifest.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
