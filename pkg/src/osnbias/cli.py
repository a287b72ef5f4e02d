"""Command-line entry point: one config file, one subcommand per stage."""
from __future__ import annotations

import argparse
import sys

from .ingest import IngestError
from .pipeline import COMMANDS, ConfigError, StageError, load_config, run
from .sentiment import LexiconError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="osnbias",
        description="Detect biased social-network users from behavioral features.")
    sub = parser.add_subparsers(dest="command", required=True)
    help_text = {
        "synth": "generate a synthetic population",
        "ingest": "build the user table from dataset files",
        "score": "score post sentiment",
        "label": "compute attitudes and bias labels",
        "correlate": "emit feature/attitude correlation matrices",
        "train": "train the bias classifier",
        "evaluate": "evaluate the classifier on the held-out split",
        "pipeline": "run every stage in order",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=help_text[name])
        p.add_argument("-c", "--config", required=True,
                       help="path to the JSON pipeline config")
        p.add_argument("--output-dir", help="override config output_dir")
        p.add_argument("--seed", type=int,
                       help="override the train/split/synth seeds")
        p.add_argument("--k", type=float,
                       help="override the sigma multiplier for bias labeling")
        p.add_argument("--mean-attitude", action="store_true",
                       help="aggregate attitude as the mean of post scores")
        p.add_argument("--among-biased", action="store_true",
                       help="classify overly positive vs overly negative "
                            "among biased users instead of biased vs normal")
    return parser


def _apply_overrides(cfg: dict, args) -> dict:
    if args.output_dir:
        cfg["output_dir"] = args.output_dir
    if args.seed is not None:
        cfg.setdefault("train", {})["seed"] = args.seed
        cfg.setdefault("split", {})["seed"] = args.seed
        if "synth" in cfg:
            cfg["synth"]["seed"] = args.seed
    if args.k is not None:
        cfg["k"] = args.k
    if args.mean_attitude:
        cfg["attitude_mode"] = "mean"
    if args.among_biased:
        cfg["target"] = "among_biased"
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        run(args.command, cfg)
    except (ConfigError, StageError, IngestError, LexiconError, ValueError) as exc:
        print(f"osnbias {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
