"""Run configuration: a flat dataclass, a key=value file format, and
command-line overrides.  Every run persists its resolved config verbatim
next to the checkpoints it produces.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

POLICIES = ("reinforce", "ppo", "fixed-center", "random")
GLIMPSE_COUNTS = (1, 4, 8, 12)
CORE_WIDTHS = (256, 512, 1024)


@dataclass
class RunConfig:
    # model
    glimpses: int = 4
    core_width: int = 256
    glimpse_dim: int = 128
    channels_p1: tuple = (8, 8, 16, 16, 32, 32)
    channels_p23: tuple = (8, 8, 16, 16)
    # training
    policy: str = "ppo"
    batch_size: int = 32
    lr_supervised: float = 1e-4
    lr_rl: float = 1e-3
    grad_clip: float = 0.0                # global L2 norm; 0 disables
    epochs: int = 50
    seed: int = 7
    loss_k: float = 1.0
    # ppo
    clip_eps: float = 0.2
    replay_capacity: int = 2048
    refine_steps: int = 20
    refine_minibatch: int = 256
    # data
    dataset: str = "synthetic"            # "synthetic" or "kitti"
    dataset_root: str = ""                # kitti root; $GLIMPSEVO_DATA if empty
    synth_pairs: int = 2000
    synth_val_pairs: int = 400
    synth_image_size: int = 128
    synth_step_translation: float = 0.5
    synth_speed_jitter: float = 0.3       # fractional forward-speed variation
    synth_yaw_rate: float = 0.02
    synth_strafe: float = 0.3             # lateral motion, fraction of step
    synth_tilt_jitter: float = 0.0        # desk task keeps roll/pitch exactly 0
    synth_texture_fraction: float = 1.0   # <1 leaves the rest of the plane flat
    synth_patch_scale: float = 4.0        # metres per texture-mask noise cell
    synth_texture_scale: float = 4.0      # metres per base texture noise cell
    image_width: int = 1200               # kitti resize target
    image_height: int = 360
    clahe_clip: float = 2.0
    # output
    out_dir: str = "runs/default"

    def validate(self):
        if self.glimpses not in GLIMPSE_COUNTS:
            raise ValueError(f"glimpses must be one of {GLIMPSE_COUNTS}, got {self.glimpses}")
        if self.core_width not in CORE_WIDTHS:
            raise ValueError(f"core_width must be one of {CORE_WIDTHS}, got {self.core_width}")
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if self.dataset not in ("synthetic", "kitti"):
            raise ValueError(f"dataset must be 'synthetic' or 'kitti', got {self.dataset!r}")
        for name in ("batch_size", "epochs", "synth_pairs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.lr_supervised <= 0 or self.lr_rl <= 0 or self.loss_k <= 0:
            raise ValueError("learning rates and loss_k must be positive")
        if self.grad_clip < 0:
            raise ValueError("grad_clip must be >= 0 (0 disables clipping)")
        return self

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["channels_p1"] = list(self.channels_p1)
        d["channels_p23"] = list(self.channels_p23)
        return d

    @staticmethod
    def from_dict(d):
        cfg = RunConfig()
        for f in dataclasses.fields(RunConfig):
            if f.name in d:
                v = d[f.name]
                if isinstance(getattr(cfg, f.name), tuple):
                    v = tuple(v)
                setattr(cfg, f.name, v)
        return cfg


def _parse_value(field_obj, raw, current):
    raw = raw.strip()
    if isinstance(current, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(current, tuple):
        return tuple(int(v) for v in raw.replace(",", " ").split())
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return raw


def parse_config_file(path):
    """Flat `key = value` lines; '#' starts a comment."""
    cfg = RunConfig()
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    with open(path) as f:
        for ln, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key = value")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in fields:
                raise ValueError(f"{path}:{ln}: unknown key {key!r}")
            setattr(cfg, key, _parse_value(fields[key], raw, getattr(cfg, key)))
    return cfg


def apply_overrides(cfg, overrides):
    """overrides: iterable of 'key=value' strings."""
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not key=value")
        key, raw = (s.strip() for s in item.split("=", 1))
        if key not in fields:
            raise ValueError(f"unknown config key {key!r}")
        setattr(cfg, key, _parse_value(fields[key], raw, getattr(cfg, key)))
    return cfg


def write_config(cfg, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for fld in dataclasses.fields(RunConfig):
            v = getattr(cfg, fld.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            f.write(f"{fld.name} = {v}\n")
