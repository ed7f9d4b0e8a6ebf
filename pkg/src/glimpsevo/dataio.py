"""Dataset ingestion: KITTI-odometry-format sequences, frame preprocessing,
relative-pose targets, train/val/test splits, and a synthetic generator that
renders a procedurally textured ground plane under known 6-DoF motion.

On-disk layout (both real and synthetic data):
    <root>/sequences/NN/image_0/*.png
    <root>/poses/NN.txt            # 12 reals per line, row-major 3x4, cam-to-world
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .pose import Pose6DoF, PoseSE3, euler_to_matrix, nearest_rotation, relative_pose

log = logging.getLogger(__name__)

TRAIN_SEQUENCES = ("00", "02", "04", "05", "06", "08", "09")
VAL_SEQUENCES = ("10",)
TEST_SEQUENCES = ("03", "07")

KITTI_TARGET_SIZE = (1200, 360)  # (width, height)


@dataclass
class Frame:
    pixels: np.ndarray          # (H, W) float32, z-scored
    index: int
    original_size: tuple        # (width, height) before resize


@dataclass
class SamplePair:
    pixels: np.ndarray          # (2, H, W) float32: frames t and t+1 stacked
    target: Pose6DoF            # motion from frame t to t+1
    sequence: str = "00"
    index: int = 0


# ----------------------------------------------------------------------
# preprocessing
# ----------------------------------------------------------------------
def preprocess(raw, clahe_clip=2.0):
    """CLAHE (8x8 tile grid) then per-image z-score. Returns float32 (H, W)."""
    raw = np.asarray(raw)
    if raw.size == 0:
        raise ValueError("empty image")
    if raw.dtype != np.uint8:
        raw = np.clip(raw, 0, 255).astype(np.uint8)
    clahe = cv2.createCLAHE(clipLimit=float(clahe_clip), tileGridSize=(8, 8))
    eq = clahe.apply(raw).astype(np.float64)
    mu = eq.mean()
    sd = max(eq.std(), 1e-8)
    return ((eq - mu) / sd).astype(np.float32)


def zscore(img):
    img = np.asarray(img, dtype=np.float64)
    return ((img - img.mean()) / max(img.std(), 1e-8)).astype(np.float32)


# ----------------------------------------------------------------------
# KITTI-format files
# ----------------------------------------------------------------------
def read_pose_file(path):
    poses = []
    with open(path) as f:
        for ln, line in enumerate(f):
            vals = line.split()
            if not vals:
                continue
            if len(vals) != 12:
                raise ValueError(f"{path}:{ln + 1}: expected 12 values, got {len(vals)}")
            m = np.array([float(v) for v in vals], dtype=np.float64).reshape(3, 4)
            r = m[:, :3]
            if np.abs(r.T @ r - np.eye(3)).max() > 1e-6:
                log.warning("%s:%d: non-orthonormal rotation, projecting to SO(3)", path, ln + 1)
                r = nearest_rotation(r)
            poses.append(PoseSE3(r, m[:, 3]))
    return poses


def write_pose_file(path, poses):
    with open(path, "w") as f:
        for p in poses:
            m = np.hstack([p.rotation, p.translation.reshape(3, 1)])
            f.write(" ".join(f"{v:.9e}" for v in m.reshape(-1)) + "\n")


def load_kitti_sequence(image_dir, pose_file, target_size=KITTI_TARGET_SIZE, clahe_clip=2.0):
    """Load one sequence as a list of (Frame, PoseSE3)."""
    image_dir = Path(image_dir)
    poses = read_pose_file(pose_file)
    files = sorted(image_dir.glob("*.png"))
    if len(files) != len(poses):
        raise ValueError(
            f"{image_dir}: {len(files)} images but {len(poses)} pose lines in {pose_file}"
        )
    out = []
    for i, fp in enumerate(files):
        raw = cv2.imread(str(fp), cv2.IMREAD_GRAYSCALE)
        if raw is None:
            raise IOError(f"cannot read {fp}")
        orig = (raw.shape[1], raw.shape[0])
        if orig != tuple(target_size):
            raw = cv2.resize(raw, tuple(target_size), interpolation=cv2.INTER_LINEAR)
        out.append((Frame(preprocess(raw, clahe_clip), i, orig), poses[i]))
    return out


def make_sample_pairs(frames, poses, sequence="00"):
    """Consecutive-frame pairs with relative 6-DoF targets (cam-to-world poses)."""
    pairs = []
    for i in range(len(frames) - 1):
        pix = np.stack([frames[i].pixels, frames[i + 1].pixels]).astype(np.float32)
        pairs.append(SamplePair(pix, relative_pose(poses[i], poses[i + 1]), sequence, i))
    return pairs


def split_sequences(present):
    """Assign available sequence ids to the fixed train/val/test split."""
    present = {f"{int(s):02d}" for s in present}
    split = {"train": [], "val": [], "test": []}
    for name, wanted in (("train", TRAIN_SEQUENCES), ("val", VAL_SEQUENCES), ("test", TEST_SEQUENCES)):
        for s in wanted:
            if s in present:
                split[name].append(s)
            else:
                log.warning("sequence %s missing, skipping from %s split", s, name)
    return split


# ----------------------------------------------------------------------
# target normalization
# ----------------------------------------------------------------------
@dataclass
class TargetNormalizer:
    mean: np.ndarray = field(default_factory=lambda: np.zeros(6))
    std: np.ndarray = field(default_factory=lambda: np.ones(6))

    @staticmethod
    def fit(targets):
        arr = np.stack([t.as_array() for t in targets])
        return TargetNormalizer(arr.mean(axis=0), np.maximum(arr.std(axis=0), 1e-8))

    def normalize(self, arr):
        return (np.asarray(arr, dtype=np.float64) - self.mean) / self.std

    def denormalize(self, arr):
        return np.asarray(arr, dtype=np.float64) * self.std + self.mean

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @staticmethod
    def from_dict(d):
        return TargetNormalizer(np.asarray(d["mean"]), np.asarray(d["std"]))


# ----------------------------------------------------------------------
# synthetic generator
# ----------------------------------------------------------------------
@dataclass
class SynthConfig:
    image_size: int = 128          # square frames
    n_pairs: int = 200
    seed: int = 0
    focal: float = 160.0           # px
    height: float = 10.0           # camera height above the ground plane, m
    step_translation: float = 0.25 # nominal forward speed, m per frame
    speed_jitter: float = 0.3      # fractional speed variation
    strafe_jitter: float = 0.0     # lateral motion amplitude, fraction of step
    yaw_rate_max: float = 0.02     # rad per frame
    tilt_jitter: float = 0.004     # roll/pitch amplitude, rad
    dz_jitter: float = 0.0         # camera height variation, m
    octaves: int = 4
    texture_scale: float = 4.0     # metres per base noise cell
    texture_fraction: float = 1.0  # fraction of the plane carrying texture
    patch_scale: float = 4.0       # metres per texture-mask noise cell

    def max_pixel_shift(self):
        planar = self.step_translation * (1 + self.speed_jitter + self.strafe_jitter)
        trans = self.focal * (planar + self.dz_jitter) / self.height
        diag = self.image_size * np.sqrt(2.0) / 2.0
        rot = diag * self.yaw_rate_max + self.focal * 2.0 * self.tilt_jitter
        return trans + rot

    def validate(self):
        d = self.max_pixel_shift()
        w = float(self.image_size)
        overlap = max(0.0, 1 - d / w) ** 2
        if overlap < 0.6:
            raise ValueError(
                f"motion amplitude gives worst-case shift {d:.1f} px on a {self.image_size} px frame "
                f"(overlap {overlap:.2f} < 0.60)"
            )
        if self.n_pairs < 1 or self.image_size < 32:
            raise ValueError("need n_pairs >= 1 and image_size >= 32")


_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def _hash01(ix, iy, seed):
    """Deterministic lattice hash -> uniform [0, 1)."""
    h = ix.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
    h ^= iy.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
    h ^= np.uint64((int(seed) * 0x165667B19E3779F9) & 0xFFFFFFFFFFFFFFFF)
    h &= _MASK
    h ^= h >> np.uint64(30)
    h *= np.uint64(0xBF58476D1CE4E5B9)
    h &= _MASK
    h ^= h >> np.uint64(27)
    h *= np.uint64(0x94D049BB133111EB)
    h &= _MASK
    h ^= h >> np.uint64(31)
    return (h >> np.uint64(40)).astype(np.float64) / float(1 << 24)


def value_noise(u, v, seed, octaves=4, base_scale=4.0):
    """Multi-octave value noise over the plane, in [0, 1]."""
    out = np.zeros_like(u, dtype=np.float64)
    amp_total = 0.0
    for o in range(octaves):
        freq = (2.0 ** o) / base_scale
        amp = 0.55 ** o
        x = u * freq
        y = v * freq
        ix = np.floor(x).astype(np.int64)
        iy = np.floor(y).astype(np.int64)
        fx = x - ix
        fy = y - iy
        sx = fx * fx * (3 - 2 * fx)
        sy = fy * fy * (3 - 2 * fy)
        oseed = seed * 1013 + o
        v00 = _hash01(ix, iy, oseed)
        v10 = _hash01(ix + 1, iy, oseed)
        v01 = _hash01(ix, iy + 1, oseed)
        v11 = _hash01(ix + 1, iy + 1, oseed)
        top = v00 + sx * (v10 - v00)
        bot = v01 + sx * (v11 - v01)
        out += amp * (top + sy * (bot - top))
        amp_total += amp
    return out / amp_total


# camera base orientation: optical axis points straight down at the plane
_R_DOWN = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])


def _camera_pose(x, y, z, yaw, roll, pitch):
    rot = euler_to_matrix(0.0, 0.0, yaw) @ _R_DOWN @ euler_to_matrix(roll, pitch, 0.0)
    return PoseSE3(rot, np.array([x, y, z]))


def _mask_threshold(cfg: SynthConfig):
    """World-constant mask-noise threshold whose exceedance fraction is
    cfg.texture_fraction, estimated once on a fixed deterministic grid."""
    g = np.linspace(0.0, 97.3, 640)
    u, v = np.meshgrid(g, g)
    sample = value_noise(u, v, cfg.seed + 77, 2, cfg.patch_scale)
    return float(np.quantile(sample, 1.0 - cfg.texture_fraction))


def render_frame(cfg: SynthConfig, pose: PoseSE3, mask_threshold=None):
    n = cfg.image_size
    c = (n - 1) / 2.0
    px, py = np.meshgrid(np.arange(n, dtype=np.float64), np.arange(n, dtype=np.float64))
    rays = np.stack([(px - c) / cfg.focal, (py - c) / cfg.focal, np.ones_like(px)])
    d = np.einsum("ij,jhw->ihw", pose.rotation, rays)
    s = -pose.translation[2] / d[2]
    u = pose.translation[0] + s * d[0]
    v = pose.translation[1] + s * d[1]
    tex = value_noise(u, v, cfg.seed, cfg.octaves, cfg.texture_scale)
    if cfg.texture_fraction < 1.0:
        # exactly flat outside the patches: motion is unobservable there,
        # so glimpse placement carries real information
        if mask_threshold is None:
            mask_threshold = _mask_threshold(cfg)
        m = value_noise(u, v, cfg.seed + 77, 2, cfg.patch_scale)
        tex = np.where(m > mask_threshold, tex, 0.5)
    return np.clip(tex * 255.0, 0, 255).astype(np.uint8)


def generate_synthetic_poses(cfg: SynthConfig):
    """Absolute camera-to-world poses for n_pairs + 1 frames."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    poses = []
    x = y = 0.0
    yaw = 0.0
    for _ in range(cfg.n_pairs + 1):
        roll = rng.uniform(-cfg.tilt_jitter, cfg.tilt_jitter)
        pitch = rng.uniform(-cfg.tilt_jitter, cfg.tilt_jitter)
        dz = rng.uniform(-cfg.dz_jitter, cfg.dz_jitter)
        poses.append(_camera_pose(x, y, cfg.height + dz, yaw, roll, pitch))
        speed = cfg.step_translation * (1.0 + rng.uniform(-cfg.speed_jitter, cfg.speed_jitter))
        side = cfg.step_translation * cfg.strafe_jitter * rng.uniform(-1.0, 1.0)
        x += speed * np.cos(yaw) - side * np.sin(yaw)
        y += speed * np.sin(yaw) + side * np.cos(yaw)
        yaw += rng.uniform(-cfg.yaw_rate_max, cfg.yaw_rate_max)
    return poses


def generate_synthetic_sequence(cfg: SynthConfig, sequence="00"):
    """Render the sequence and return (pairs, frames_u8, poses)."""
    poses = generate_synthetic_poses(cfg)
    thr = _mask_threshold(cfg) if cfg.texture_fraction < 1.0 else None
    raw = [render_frame(cfg, p, mask_threshold=thr) for p in poses]
    frames = [Frame(preprocess(r), i, (cfg.image_size, cfg.image_size)) for i, r in enumerate(raw)]
    return make_sample_pairs(frames, poses, sequence), raw, poses


def write_synthetic_dataset(cfg: SynthConfig, root, sequence="00"):
    """Persist a rendered sequence in the KITTI directory layout."""
    root = Path(root)
    img_dir = root / "sequences" / sequence / "image_0"
    pose_dir = root / "poses"
    img_dir.mkdir(parents=True, exist_ok=True)
    pose_dir.mkdir(parents=True, exist_ok=True)
    poses = generate_synthetic_poses(cfg)
    for i, p in enumerate(poses):
        cv2.imwrite(str(img_dir / f"{i:06d}.png"), render_frame(cfg, p))
    write_pose_file(pose_dir / f"{sequence}.txt", poses)
    return img_dir, pose_dir / f"{sequence}.txt"


def dataset_root():
    """Dataset root from $GLIMPSEVO_DATA, defaulting to ./data."""
    return Path(os.environ.get("GLIMPSEVO_DATA", "data"))
