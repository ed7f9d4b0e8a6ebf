#!/usr/bin/env python3
"""Sweep the number of glimpses T and the location policy, reporting
held-out drift per cell — the desk-scale analogue of the observation-count
ablation.

Usage:
    python3 scripts/observation_count_sweep.py [--out runs/sweep]
        [--glimpses 4 8] [--policies ppo random] [--seeds 7 8 9]
"""

import argparse
import json
from pathlib import Path

import numpy as np

from glimpsevo.config import parse_config_file
from glimpsevo.trainer import Trainer


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="configs/desk-synthetic.cfg")
    ap.add_argument("--out", default="runs/sweep")
    ap.add_argument("--glimpses", type=int, nargs="+", default=[4, 8])
    ap.add_argument("--policies", nargs="+", default=["ppo", "random"])
    ap.add_argument("--seeds", type=int, nargs="+", default=[7, 8, 9])
    ap.add_argument("--epochs", type=int, default=None)
    ap.add_argument("--pairs", type=int, default=None)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = {}
    for T in args.glimpses:
        for policy in args.policies:
            per_seed = []
            for seed in args.seeds:
                cfg = parse_config_file(args.config)
                if args.epochs is not None:
                    cfg.epochs = args.epochs
                if args.pairs is not None:
                    cfg.synth_pairs = args.pairs
                cfg.glimpses = T
                cfg.policy = policy
                cfg.seed = seed
                cfg.out_dir = str(out / f"T{T}_{policy}_s{seed}")
                trainer = Trainer(cfg)
                trainer.train()
                rows = trainer.evaluate("val", rng_seed=seed + 1000)
                per_seed.append(float(np.mean([r.t_rpe for _, r in rows])))
            key = f"T{T}_{policy}"
            results[key] = {"t_rpe_per_seed": per_seed,
                            "t_rpe_median": float(np.median(per_seed))}
            print(f"{key}: median t_rpe {results[key]['t_rpe_median']:.3f}% "
                  f"(seeds: {', '.join(f'{v:.3f}' for v in per_seed)})")

    (out / "sweep_results.json").write_text(json.dumps(results, indent=2))
    print(f"\nwrote {out / 'sweep_results.json'}")


if __name__ == "__main__":
    main()
