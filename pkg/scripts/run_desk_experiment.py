#!/usr/bin/env python3
"""Desk-scale end-to-end experiment: train with the PPO-refined location
policy, train a random-location ablation under the identical budget, and
report held-out drift for both.

Usage:
    python3 scripts/run_desk_experiment.py [--out runs/desk] [--seed 7]
                                           [--epochs 50] [--pairs 2000]
"""

import argparse
from pathlib import Path

import numpy as np

from glimpsevo.config import RunConfig, parse_config_file
from glimpsevo.dataio import load_dataset
from glimpsevo.trainer import Trainer, fit_normalizer


def mean_predictor_loss(cfg: RunConfig) -> float:
    """Loss of the constant predictor that outputs the per-component mean
    of the normalized training targets (the floor any model must beat)."""
    train, _, _ = load_dataset(cfg)
    norm = fit_normalizer(train)
    tgt = np.concatenate([
        norm.normalize(np.stack([seq.target(i).as_array()
                                 for i in range(seq.n_pairs())]))
        for seq in train])
    weights = np.array([cfg.loss_k] * 3 + [1.0] * 3)
    return float((weights * tgt.var(axis=0)).sum())


def run_one(base: RunConfig, policy: str, out: Path, seed: int):
    cfg = RunConfig(**{**base.to_dict(), "policy": policy,
                       "out_dir": str(out / policy), "seed": seed})
    cfg.channels_p1 = tuple(cfg.channels_p1)
    cfg.channels_p23 = tuple(cfg.channels_p23)
    trainer = Trainer(cfg)
    trainer.train()
    rows = trainer.evaluate("val", rng_seed=seed + 1000)
    t_rpe = float(np.mean([r.t_rpe for _, r in rows]))
    final_loss = trainer.record[-1]["supervised_loss"]
    return final_loss, t_rpe


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="configs/desk-synthetic.cfg")
    ap.add_argument("--out", default="runs/desk-experiment")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--epochs", type=int, default=None)
    ap.add_argument("--pairs", type=int, default=None)
    args = ap.parse_args()

    base = parse_config_file(args.config)
    if args.epochs is not None:
        base.epochs = args.epochs
    if args.pairs is not None:
        base.synth_pairs = args.pairs
    out = Path(args.out)

    results = {}
    for policy in ("ppo", "random"):
        loss, t_rpe = run_one(base, policy, out, args.seed)
        results[policy] = (loss, t_rpe)
        print(f"{policy}: final train loss {loss:.4f}, held-out t_rpe {t_rpe:.3f}%")

    baseline = mean_predictor_loss(base)
    loss_ratio = baseline / results["ppo"][0]
    print(f"\nmean-predictor loss: {baseline:.3f}")
    rpe_ratio = results["ppo"][1] / results["random"][1]
    print(f"loss improvement over mean predictor: {loss_ratio:.1f}x")
    print(f"learned/random held-out t_rpe ratio:  {rpe_ratio:.2f}")


if __name__ == "__main__":
    main()
