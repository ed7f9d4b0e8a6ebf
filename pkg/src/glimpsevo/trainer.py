"""Hybrid training loop (supervised pose regression + policy gradient on the
glimpse locations), evaluation, and trajectory prediction.

One batch: run T glimpse steps per pair, regress the pose, take one Adam
step on the supervised parameters, then the configured policy update
(one REINFORCE step, or `refine_steps` PPO refinement steps over replay).
Locator/baseliner and glimpse/core/regressor parameters never mix.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig
from .dataio import (SynthConfig, TargetNormalizer, _mask_threshold, dataset_root,
                     generate_synthetic_poses,
                     load_kitti_sequence, make_sample_pairs, preprocess, split_sequences, render_frame)
from .metrics import DriftReport, accumulate, drift_over_lengths, format_report_text, write_report_csv
from .model import GlimpseVOModel, ModelConfig
from .optim import Adam
from .policy import ReplayMemory, ppo_update, reinforce_update, reward
from .pose import Pose6DoF, PoseSE3, relative_pose
from .regressor import supervised_loss
from .tensor import Tensor

log = logging.getLogger(__name__)

RECORD_FIELDS = ("epoch", "supervised_loss", "mean_reward", "mean_sigma",
                 "adv_variance", "val_t_rpe", "val_r_rpe", "val_ate", "wall_clock")


@dataclass
class SequenceData:
    """One sequence held in memory: preprocessed frames plus absolute poses."""
    sequence: str
    frames: list                 # (H, W) float32 arrays
    poses: list                  # PoseSE3, camera-to-world

    def n_pairs(self):
        return len(self.frames) - 1

    def pair_pixels(self, i):
        return np.stack([self.frames[i], self.frames[i + 1]])

    def target(self, i):
        return relative_pose(self.poses[i], self.poses[i + 1])


def synthetic_sequence(cfg: RunConfig, n_pairs, seed, sequence="00"):
    scfg = SynthConfig(image_size=cfg.synth_image_size, n_pairs=n_pairs, seed=seed,
                       step_translation=cfg.synth_step_translation,
                       speed_jitter=cfg.synth_speed_jitter,
                       yaw_rate_max=cfg.synth_yaw_rate,
                       strafe_jitter=cfg.synth_strafe,
                       tilt_jitter=cfg.synth_tilt_jitter,
                       texture_fraction=cfg.synth_texture_fraction,
                       patch_scale=cfg.synth_patch_scale,
                       texture_scale=cfg.synth_texture_scale)
    poses = generate_synthetic_poses(scfg)
    thr = _mask_threshold(scfg) if scfg.texture_fraction < 1.0 else None
    frames = [preprocess(render_frame(scfg, p, mask_threshold=thr), cfg.clahe_clip)
              for p in poses]
    return SequenceData(sequence, frames, poses)


def load_dataset(cfg: RunConfig):
    """Returns (train: list[SequenceData], val: list, test: list)."""
    if cfg.dataset == "synthetic":
        train = [synthetic_sequence(cfg, cfg.synth_pairs, cfg.seed, "00")]
        val = [synthetic_sequence(cfg, cfg.synth_val_pairs, cfg.seed + 1, "10")]
        test = [synthetic_sequence(cfg, cfg.synth_val_pairs, cfg.seed + 2, "03")]
        return train, val, test
    root = Path(cfg.dataset_root) if cfg.dataset_root else dataset_root()
    present = [p.name for p in sorted((root / "sequences").iterdir()) if p.is_dir()]
    split = split_sequences(present)
    out = {}
    for name in ("train", "val", "test"):
        seqs = []
        for s in split[name]:
            loaded = load_kitti_sequence(root / "sequences" / s / "image_0",
                                         root / "poses" / f"{s}.txt",
                                         (cfg.image_width, cfg.image_height), cfg.clahe_clip)
            seqs.append(SequenceData(s, [f.pixels for f, _ in loaded], [p for _, p in loaded]))
        out[name] = seqs
    return out["train"], out["val"], out["test"]


def fit_normalizer(train):
    targets = []
    for seq in train:
        targets.extend(seq.target(i) for i in range(seq.n_pairs()))
    return TargetNormalizer.fit(targets)


def model_config(cfg: RunConfig):
    return ModelConfig(glimpses=cfg.glimpses, core_width=cfg.core_width,
                       glimpse_dim=cfg.glimpse_dim, channels_p1=cfg.channels_p1,
                       channels_p23=cfg.channels_p23)


def _policy_mode(policy):
    return {"reinforce": "learned", "ppo": "learned",
            "fixed-center": "center", "random": "random"}[policy]


def per_sample_losses(pred, targets_norm, k):
    d = pred - targets_norm
    return (d[:, 3:6] ** 2).sum(axis=1) + k * (d[:, 0:3] ** 2).sum(axis=1)


@dataclass
class Trainer:
    cfg: RunConfig
    model: GlimpseVOModel = None
    normalizer: TargetNormalizer = None
    record: list = field(default_factory=list)

    def __post_init__(self):
        self.cfg.validate()
        self.out = Path(self.cfg.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)

    # -- checkpointing --------------------------------------------------
    def save(self, path, epoch=None):
        meta = {"config": self.cfg.to_dict(),
                "model": self.model.cfg.to_dict(),
                "normalizer": self.normalizer.to_dict(),
                "epoch": epoch}
        save_checkpoint(path, self.model.params, meta)

    @staticmethod
    def load(path):
        arrays, meta = load_checkpoint(path)
        cfg = RunConfig.from_dict(meta["config"])
        t = Trainer(cfg)
        t.model = GlimpseVOModel(ModelConfig.from_dict(meta["model"]), seed=cfg.seed)
        t.model.params.load_arrays(arrays)
        t.normalizer = TargetNormalizer.from_dict(meta["normalizer"])
        return t

    # -- training -------------------------------------------------------
    def train(self):
        cfg = self.cfg
        train, val, _ = load_dataset(cfg)
        self.normalizer = fit_normalizer(train)
        self.model = GlimpseVOModel(model_config(cfg), seed=cfg.seed)
        opt_sup = Adam(self.model.params, self.model.supervised_paths(), cfg.lr_supervised,
                       clip_norm=cfg.grad_clip or None)
        opt_rl = Adam(self.model.params, self.model.policy_paths(), cfg.lr_rl)
        memory = ReplayMemory(cfg.replay_capacity)
        rng = np.random.default_rng(cfg.seed)
        mode = _policy_mode(cfg.policy)
        rl_active = cfg.policy in ("reinforce", "ppo") and cfg.glimpses >= 2

        # flat index over (sequence, pair)
        index = [(si, i) for si, seq in enumerate(train) for i in range(seq.n_pairs())]
        targets_norm = {}
        for si, seq in enumerate(train):
            arr = np.stack([seq.target(i).as_array() for i in range(seq.n_pairs())])
            targets_norm[si] = self.normalizer.normalize(arr).astype(np.float32)

        diag_path = self.out / "policy_diagnostics.txt"
        record_path = self.out / "training_record.csv"
        episode_counter = 0
        for epoch in range(cfg.epochs):
            t0 = time.time()
            order = rng.permutation(len(index))
            epoch_loss = []
            epoch_stats = {"mean_reward": [], "mean_sigma": [], "adv_variance": []}
            locations_seen = []
            for start in range(0, len(order), cfg.batch_size):
                batch_idx = [index[j] for j in order[start:start + cfg.batch_size]]
                pixels = np.stack([train[si].pair_pixels(i) for si, i in batch_idx])
                tgt = np.stack([targets_norm[si][i] for si, i in batch_idx])

                res = self.model.rollout(pixels, rng, policy_mode=mode,
                                         collect_episodes=rl_active,
                                         episode_base=episode_counter)
                episode_counter += len(batch_idx)
                loss = supervised_loss(res.prediction, tgt, cfg.loss_k)
                if not np.isfinite(loss.data):
                    self.save(self.out / "checkpoint.npz", epoch)
                    raise FloatingPointError(f"non-finite loss at epoch {epoch}")
                self.model.params.zero_grad()
                loss.backward()
                opt_sup.step()
                epoch_loss.append(loss.item())
                locations_seen.append(res.locations.reshape(-1, 2))

                if rl_active:
                    losses_i = per_sample_losses(res.prediction.data.astype(np.float64), tgt, cfg.loss_k)
                    for ep, li in zip(res.episodes, losses_i):
                        ep.reward = reward(li)
                    if cfg.policy == "reinforce":
                        stats = reinforce_update(res.episodes, self.model.locator,
                                                 self.model.baseliner, opt_rl)
                    else:
                        for ep in res.episodes:
                            memory.add(ep)
                        stats = ppo_update(memory, self.model.locator, self.model.baseliner,
                                           opt_rl, cfg.clip_eps, cfg.refine_steps,
                                           cfg.refine_minibatch, rng)
                    for k, v in stats.items():
                        epoch_stats[k].append(v)

            row = {"epoch": epoch,
                   "supervised_loss": float(np.mean(epoch_loss)),
                   "mean_reward": float(np.mean(epoch_stats["mean_reward"])) if epoch_stats["mean_reward"] else 0.0,
                   "mean_sigma": float(np.mean(epoch_stats["mean_sigma"])) if epoch_stats["mean_sigma"] else 0.0,
                   "adv_variance": float(np.mean(epoch_stats["adv_variance"])) if epoch_stats["adv_variance"] else 0.0}
            val_rows = self.evaluate_sequences(val, rng_seed=cfg.seed + 1000) if val else []
            if val_rows:
                row["val_t_rpe"] = float(np.mean([r.t_rpe for _, r in val_rows]))
                row["val_r_rpe"] = float(np.mean([r.r_rpe for _, r in val_rows]))
                row["val_ate"] = float(np.mean([r.ate for _, r in val_rows]))
            else:
                row["val_t_rpe"] = row["val_r_rpe"] = row["val_ate"] = float("nan")
            row["wall_clock"] = time.time() - t0
            self.record.append(row)
            self._write_record(record_path)
            self._write_diagnostics(diag_path, epoch, row, np.concatenate(locations_seen))
            self.save(self.out / "checkpoint.npz", epoch)
            log.info("epoch %d: loss %.4f reward %.3f val_t_rpe %.3f",
                     epoch, row["supervised_loss"], row["mean_reward"], row["val_t_rpe"])
        return self.out / "checkpoint.npz"

    def _write_record(self, path):
        with open(path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=RECORD_FIELDS)
            w.writeheader()
            for row in self.record:
                w.writerow({k: row.get(k, "") for k in RECORD_FIELDS})

    def _write_diagnostics(self, path, epoch, row, locations):
        hist, _, _ = np.histogram2d(locations[:, 0], locations[:, 1],
                                    bins=8, range=[[-1, 1], [-1, 1]])
        with open(path, "a") as f:
            f.write(f"epoch {epoch}: sigma={row['mean_sigma']:.4f} "
                    f"reward={row['mean_reward']:.4f} adv_var={row['adv_variance']:.6f}\n")
            for r in hist.astype(int):
                f.write("  " + " ".join(f"{v:5d}" for v in r) + "\n")
        try:
            import matplotlib
            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
            fig, ax = plt.subplots(figsize=(3, 3))
            ax.imshow(hist.T, origin="lower", extent=[-1, 1, -1, 1])
            ax.set_title(f"visited locations, epoch {epoch}")
            fig.savefig(self.out / "locations.png", dpi=80)
            plt.close(fig)
        except Exception:   # plotting must never kill a run
            log.exception("location histogram plot failed")

    # -- evaluation -----------------------------------------------------
    def predict_relatives(self, seq: SequenceData, rng):
        """Greedy (mean, no sampling) relative-pose predictions, de-normalized."""
        cfg = self.cfg
        mode = _policy_mode(cfg.policy)
        preds = []
        for start in range(0, seq.n_pairs(), cfg.batch_size):
            idx = range(start, min(start + cfg.batch_size, seq.n_pairs()))
            pixels = np.stack([seq.pair_pixels(i) for i in idx])
            res = self.model.rollout(pixels, rng, policy_mode=mode, sample=False)
            preds.append(res.prediction.data.astype(np.float64))
        preds = self.normalizer.denormalize(np.concatenate(preds))
        return [Pose6DoF.from_array(p) for p in preds]

    def evaluate_sequences(self, seqs, rng_seed=0):
        rows = []
        for seq in seqs:
            rng = np.random.default_rng(rng_seed)
            rel = self.predict_relatives(seq, rng)
            est = accumulate(rel)
            g0 = seq.poses[0].inverse()
            gt = [g0.compose(p) for p in seq.poses]
            rows.append((seq.sequence, drift_over_lengths(gt, est)))
        return rows

    def evaluate(self, split="val", rng_seed=0):
        train, val, test = load_dataset(self.cfg)
        seqs = {"train": train, "val": val, "test": test}[split]
        rows = self.evaluate_sequences(seqs, rng_seed)
        write_report_csv(self.out / f"report_{split}.csv", rows)
        (self.out / f"report_{split}.txt").write_text(format_report_text(rows))
        return rows

    def predict(self, seq: SequenceData, out_pose_file, plot_path=None, rng_seed=0):
        from .dataio import write_pose_file
        rng = np.random.default_rng(rng_seed)
        rel = self.predict_relatives(seq, rng)
        est = accumulate(rel)
        write_pose_file(out_pose_file, est)
        if plot_path:
            plot_trajectory(est, plot_path, label=f"sequence {seq.sequence}")
        return est


def plot_trajectory(trajectories, path, label=""):
    """Top-down (x, z) plot; accepts one trajectory or a dict name->trajectory."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    if not isinstance(trajectories, dict):
        trajectories = {label or "estimate": trajectories}
    fig, ax = plt.subplots(figsize=(5, 5))
    for name, traj in trajectories.items():
        t = np.stack([p.translation for p in traj])
        ax.plot(t[:, 0], t[:, 2], label=name)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("z [m]")
    ax.axis("equal")
    ax.legend()
    fig.savefig(path, dpi=100, bbox_inches="tight")
    plt.close(fig)
