"""Full model assembly and the per-pair episode rollout.

A rollout processes a batch of frame pairs through T glimpse steps: the
first location is uniform random (or fixed, per policy mode), later ones
come from the locator; the final core state feeds the pose regressor.
Locator and baseliner only ever see detached states, so supervised and
policy parameters stay cleanly separated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import CoreNet
from .glimpse import GlimpseNet, GlimpseNetConfig, extract_pyramid
from .nn import ParameterSet
from .policy import BaselinerNet, LocatorNet, RolloutBuffer, sample_location, uniform_location
from .regressor import Regressor
from .tensor import Tensor

POLICY_MODES = ("learned", "random", "center")


@dataclass
class ModelConfig:
    glimpses: int = 4                  # T
    core_width: int = 256
    glimpse_dim: int = 512
    channels_p1: tuple = (32, 32, 64, 64, 128, 128)
    channels_p23: tuple = (32, 32, 64, 64)
    baseliner_hidden: tuple = (256, 32)
    regressor_hidden: tuple = (256, 64, 32)

    def to_dict(self):
        return {
            "glimpses": self.glimpses,
            "core_width": self.core_width,
            "glimpse_dim": self.glimpse_dim,
            "channels_p1": list(self.channels_p1),
            "channels_p23": list(self.channels_p23),
            "baseliner_hidden": list(self.baseliner_hidden),
            "regressor_hidden": list(self.regressor_hidden),
        }

    @staticmethod
    def from_dict(d):
        return ModelConfig(
            glimpses=d["glimpses"],
            core_width=d["core_width"],
            glimpse_dim=d["glimpse_dim"],
            channels_p1=tuple(d["channels_p1"]),
            channels_p23=tuple(d["channels_p23"]),
            baseliner_hidden=tuple(d["baseliner_hidden"]),
            regressor_hidden=tuple(d["regressor_hidden"]),
        )


@dataclass
class RolloutResult:
    prediction: Tensor                      # (B, 6) in normalized target space
    episodes: list
    locations: np.ndarray                   # (T, B, 2)
    pyramids: list = field(default_factory=list)


class GlimpseVOModel:
    def __init__(self, cfg: ModelConfig, seed=0, dtype=np.float32):
        self.cfg = cfg
        self.params = ParameterSet(dtype=dtype)
        rng = np.random.default_rng(seed)
        gcfg = GlimpseNetConfig(cfg.channels_p1, cfg.channels_p23, cfg.glimpse_dim)
        self.glimpse_net = GlimpseNet(self.params, "glimpse", gcfg, rng)
        self.core = CoreNet(self.params, "core", cfg.glimpse_dim, cfg.core_width, rng)
        self.regressor = Regressor(self.params, "regressor", cfg.core_width, rng, cfg.regressor_hidden)
        self.locator = LocatorNet(self.params, "locator", cfg.core_width, rng)
        self.baseliner = BaselinerNet(self.params, "baseliner", cfg.core_width, rng, cfg.baseliner_hidden)

    # -- parameter partition -------------------------------------------
    def supervised_paths(self):
        return [p for p in self.params.paths() if p.split(".")[0] in ("glimpse", "core", "regressor")]

    def policy_paths(self):
        return [p for p in self.params.paths() if p.split(".")[0] in ("locator", "baseliner")]

    def param_counts(self):
        mods = ("glimpse", "core", "regressor", "locator", "baseliner")
        counts = {m: self.params.count(m + ".") for m in mods}
        counts["total"] = sum(counts.values())
        return counts

    # -- rollout ---------------------------------------------------------
    def rollout(self, pairs, rng, policy_mode="learned", sample=True,
                collect_episodes=False, keep_pyramids=False, episode_base=0):
        """Run T glimpse steps on a (B, 2, H, W) batch and predict pose."""
        if policy_mode not in POLICY_MODES:
            raise ValueError(f"unknown policy mode {policy_mode!r}")
        pairs = np.asarray(pairs, dtype=np.float32)
        batch = pairs.shape[0]
        t_steps = self.cfg.glimpses
        state = self.core.init_state(batch, dtype=self.params.dtype)

        locs_all, logps_all, states_all, baselines_all, pyramids = [], [], [], [], []
        for t in range(t_steps):
            if policy_mode == "center":
                loc = np.zeros((batch, 2))
                logp = np.zeros(batch)
            elif policy_mode == "random" or t == 0:
                loc, logp, _ = uniform_location(batch, rng)
            elif sample:
                loc, logp, _ = sample_location(state.h, self.locator, rng)
            else:
                mu, _ = self.locator(state.h.detach())
                loc = np.clip(mu.data.astype(np.float64), -1.0, 1.0)
                logp = np.zeros(batch)
            pyr = extract_pyramid(pairs, loc)
            if keep_pyramids:
                pyramids.append(pyr)
            g = self.glimpse_net.encode(pyr, loc)
            state = self.core.step(state, g)
            locs_all.append(loc)
            logps_all.append(logp)
            if collect_episodes:
                h_detached = state.h.data.astype(np.float32).copy()
                states_all.append(h_detached)
                b = self.baseliner(Tensor(h_detached))
                baselines_all.append(b.data.astype(np.float64).copy())

        pred = self.regressor(state.h)
        episodes = []
        if collect_episodes:
            states_arr = np.stack(states_all, axis=0)       # (T, B, W)
            locs_arr = np.stack(locs_all, axis=0)
            logps_arr = np.stack(logps_all, axis=0)
            base_arr = np.stack(baselines_all, axis=0)
            for i in range(batch):
                episodes.append(RolloutBuffer(
                    episode_id=episode_base + i,
                    states=states_arr[:, i],
                    locations=locs_arr[:, i],
                    log_probs=logps_arr[:, i],
                    baselines=base_arr[:, i],
                    reward=0.0,   # filled in once the supervised loss is known
                ))
        return RolloutResult(pred, episodes, np.stack(locs_all, axis=0), pyramids)
