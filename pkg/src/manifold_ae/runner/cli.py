"""Command-line entry point: ``manifold-ae <subcommand> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import experiments as ex
from .config import ConfigError, parse_config


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1, leaving 2 for convergence / verdict failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _seed_list(text: str) -> list[int]:
    return [_seed(s) for s in text.split(",") if s.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="manifold-ae", description="Autoencoders on embedded manifolds.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, type=Path,
                        help="experiment config (JSON)")
        sp.add_argument("--out", type=Path, help="output directory (default: config output_dir)")

    sp = sub.add_parser("sample", help="sample points on the manifold")
    common(sp)
    sp.add_argument("--seed", type=_seed, help="override the sampling seed")

    sp = sub.add_parser("train", help="train a neural autoencoder")
    common(sp)
    sp.add_argument("--seed", type=_seed, help="override the training and sampling seed")
    sp.add_argument("--verbose", action="store_true")

    sp = sub.add_parser("oracle", help="build and verify the constructive autoencoder")
    common(sp)
    sp.add_argument("--seed", type=_seed, help="override the verification sampling seed")

    sp = sub.add_parser("analyze", help="analyse a trained checkpoint pair or the oracle")
    common(sp)
    sp.add_argument("--seed", type=_seed, help="override the analysis sampling seed")
    sp.add_argument("--model", type=Path, help="directory with encoder.json/decoder.json or oracle.json")

    sp = sub.add_parser("reproduce-circles", help="the interlaced-circles experiment")
    sp.add_argument("--seed", type=_seed, default=0)
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--epochs", type=int, help="shorter run for smoke tests (default 2000)")
    sp.add_argument("--verbose", action="store_true")

    sp = sub.add_parser("sweep", help="train over several seeds")
    common(sp)
    sp.add_argument("--seeds", type=_seed_list, required=True, help="comma-separated seeds")
    sp.add_argument("--jobs", type=int, default=1)
    return p


def _load(args):
    cfg = parse_config(args.config.read_text(encoding="utf-8"))
    out = args.out or (Path(cfg.output_dir) if cfg.output_dir else None)
    if out is None:
        raise ConfigError("no output directory: pass --out or set output_dir")
    return cfg, out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "reproduce-circles":
            if args.epochs is not None and args.epochs < 1:
                raise ConfigError("--epochs must be >= 1")
            return ex.cmd_reproduce_circles(args.seed, args.out, args.epochs, args.verbose)
        cfg, out = _load(args)
        seed = getattr(args, "seed", None)
        if args.command == "sample":
            return ex.cmd_sample(cfg, out, seed)
        if args.command == "train":
            if seed is not None:
                cfg = dataclasses.replace(
                    cfg, sampling_seed=seed,
                    training=dataclasses.replace(cfg.training, seed=seed))
            return ex.cmd_train(cfg, out, args.verbose)
        if args.command == "oracle":
            if seed is not None and cfg.oracle is not None:
                cfg = dataclasses.replace(cfg, oracle=dataclasses.replace(cfg.oracle, seed=seed))
            return ex.cmd_oracle(cfg, out)
        if args.command == "analyze":
            if seed is not None:
                cfg = dataclasses.replace(cfg, analysis=dataclasses.replace(cfg.analysis, seed=seed))
            return ex.cmd_analyze(cfg, out, args.model)
        if args.command == "sweep":
            return ex.cmd_sweep(cfg, args.seeds, out, args.jobs)
    except (ConfigError, ValueError, OSError) as e:
        print(f"manifold-ae {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
