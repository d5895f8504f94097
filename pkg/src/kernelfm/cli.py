"""Command line entry point: ``kernelfm <experiment> [--config F] [--seed S] [--out D] [--plots]``."""

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, InputError, NumericalError
from .experiments.config import apply_overrides, default_config, parse_config
from .experiments.runners import run_experiment

COMMANDS = {
    "rate": "rate",
    "rate-manifold": "rate_manifold",
    "flow-vs-kde": "flow_vs_kde",
    "tv-example": "tv_example",
    "bounds-check": "bounds_check",
    "manifold": "manifold_run",
}

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def build_parser():
    parser = argparse.ArgumentParser(prog="kernelfm", description="Kernel-path flow matching experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, experiment in COMMANDS.items():
        p = sub.add_parser(name, help=f"run the {experiment} experiment")
        p.add_argument("--config", type=Path, help="INI file with JSON-literal values")
        p.add_argument("--seed", type=int, help="root seed (overrides the config)")
        p.add_argument("--out", type=Path, help="output directory (overrides the config)")
        p.add_argument("--plots", action="store_true", help="also write SVG plots")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key; may be repeated")
    return parser


def load_config(args):
    experiment = COMMANDS[args.command]
    cfg = default_config(experiment)
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        cfg = parse_config(text, base=cfg)
    cfg = apply_overrides(cfg, args.set)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.out is not None:
        cfg = cfg.replace(out_dir=str(args.out))
    if cfg.experiment != experiment:
        raise ConfigError(f"config is for experiment {cfg.experiment!r}, not {experiment!r}")
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        record = run_experiment(cfg)
        paths = record.write(cfg.out_dir, plots=args.plots)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except InputError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    summary = {k: v for k, v in record.summary.items() if k != "table"}
    print(json.dumps(summary, indent=2, default=str))
    for flag in record.flags:
        print(f"flag: {flag}")
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
