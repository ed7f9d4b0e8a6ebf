"""Command-line interface.

Subcommands: train, evaluate, predict, synth-gen, report-params, plot.
Configuration comes from a flat key=value file (--config) with --set
key=value overrides; the dataset root defaults to $GLIMPSEVO_DATA.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import RunConfig, apply_overrides, parse_config_file, write_config


def _load_config(args):
    cfg = parse_config_file(args.config) if args.config else RunConfig()
    if args.set:
        apply_overrides(cfg, args.set)
    return cfg.validate()


def _add_config_args(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry (repeatable)")


def cmd_train(args):
    from .trainer import Trainer
    cfg = _load_config(args)
    trainer = Trainer(cfg)
    write_config(cfg, trainer.out / "config.cfg")
    ckpt = trainer.train()
    print(f"checkpoint written to {ckpt}")


def cmd_evaluate(args):
    from .trainer import Trainer
    trainer = Trainer.load(args.checkpoint)
    rows = trainer.evaluate(args.split, rng_seed=args.seed)
    from .metrics import format_report_text
    print(format_report_text(rows), end="")


def cmd_predict(args):
    from .trainer import Trainer, load_dataset
    trainer = Trainer.load(args.checkpoint)
    train, val, test = load_dataset(trainer.cfg)
    seqs = {s.sequence: s for s in train + val + test}
    if args.sequence not in seqs:
        sys.exit(f"sequence {args.sequence!r} not found (have {sorted(seqs)})")
    trainer.predict(seqs[args.sequence], args.out, plot_path=args.plot, rng_seed=args.seed)
    print(f"poses written to {args.out}")


def cmd_synth_gen(args):
    from .dataio import SynthConfig, write_synthetic_dataset
    scfg = SynthConfig(image_size=args.image_size, n_pairs=args.pairs, seed=args.seed,
                       step_translation=args.step_translation, yaw_rate_max=args.yaw_rate)
    scfg.validate()
    img_dir, pose_file = write_synthetic_dataset(scfg, args.out, args.sequence)
    print(f"wrote {args.pairs + 1} frames to {img_dir}, poses to {pose_file}")


def cmd_report_params(args):
    from .model import GlimpseVOModel
    from .trainer import model_config
    cfg = _load_config(args)
    model = GlimpseVOModel(model_config(cfg), seed=cfg.seed)
    counts = model.param_counts()
    for name, n in counts.items():
        print(f"{name:>10}: {n:>12,d}" + (f"  ({n / 1e6:.2f}M)" if name == "total" else ""))


def cmd_plot(args):
    from .dataio import read_pose_file
    from .trainer import plot_trajectory
    trajs = {}
    for item in args.poses:
        name, _, path = item.rpartition("=")
        trajs[name or path] = read_pose_file(path)
    plot_trajectory(trajs, args.out)
    print(f"plot written to {args.out}")


def build_parser():
    p = argparse.ArgumentParser(prog="glimpsevo", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("train", help="train a model")
    _add_config_args(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="drift metrics for a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--split", default="val", choices=("train", "val", "test"))
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("predict", help="write a predicted KITTI-format pose file")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--sequence", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--plot", default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("synth-gen", help="render a synthetic KITTI-layout dataset")
    sp.add_argument("--out", required=True)
    sp.add_argument("--pairs", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--image-size", type=int, default=128)
    sp.add_argument("--step-translation", type=float, default=0.5)
    sp.add_argument("--yaw-rate", type=float, default=0.02)
    sp.add_argument("--sequence", default="00")
    sp.set_defaults(func=cmd_synth_gen)

    sp = sub.add_parser("report-params", help="trainable parameter counts")
    _add_config_args(sp)
    sp.set_defaults(func=cmd_report_params)

    sp = sub.add_parser("plot", help="top-down trajectory plot from pose files")
    sp.add_argument("--poses", nargs="+", required=True, metavar="[NAME=]FILE")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args.func(args)


if __name__ == "__main__":
    main()
