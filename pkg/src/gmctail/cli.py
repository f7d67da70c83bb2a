"""Command-line entry point: one subcommand per experiment kind."""
import argparse
import json
import logging
import sys

from .config import KINDS, ConfigError, default_config, load_config
from .runner import ExperimentError, run_experiment


def build_parser():
    parser = argparse.ArgumentParser(prog="gmctail", description="Run chaos tail experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS + ("validate",):
        p = sub.add_parser(kind, help=f"{kind} experiment" if kind != "validate" else "check a config")
        p.add_argument("--config", help="YAML experiment file (defaults for the kind when omitted)")
        if kind == "validate":
            continue
        p.add_argument("--seed", type=int, help="override mc.seed")
        p.add_argument("--workers", type=int, help="thread hint; results do not depend on it")
        p.add_argument("--n", type=int, help="override mc.n")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("csv", "json"), action="append",
                       help="file format to write (repeatable; default both)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.kind == "validate":
            if not args.config:
                print("validate needs --config", file=sys.stderr)
                return 2
            cfg = load_config(args.config)
            sys.stdout.write(cfg.to_yaml())
            return 0
        cfg = load_config(args.config) if args.config else default_config(args.kind)
        if cfg.kind != args.kind:
            print(f"config declares experiment {cfg.kind!r}, subcommand is {args.kind!r}", file=sys.stderr)
            return 2
        cfg = cfg.with_overrides(seed=args.seed, workers=args.workers, out=args.out,
                                 formats=args.format, n=args.n)
        rec = run_experiment(cfg)
    except ConfigError as exc:
        for path, msg in exc.violations:
            print(f"config error at {path}: {msg}", file=sys.stderr)
        return 2
    except (ExperimentError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    json.dump(rec.summary(), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
