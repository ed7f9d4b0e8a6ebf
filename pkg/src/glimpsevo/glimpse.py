"""Attentional front end: multi-scale patch extraction at a location plus the
conv encoder that fuses patches with the location into the glimpse vector.

Locations are normalized: (-1, -1) is the top-left pixel center, (1, 1) the
bottom-right.  Patch extraction is hard attention: no gradient flows to the
location.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .nn import Conv2d, Linear, ParameterSet
from .tensor import Tensor

PATCH = 32
SCALES = (32, 64, 128)
PIXELS_PER_GLIMPSE = 3 * PATCH * PATCH  # raw pixel budget per observation


def loc_to_pixel(loc, width, height):
    """Normalized [-1, 1]^2 -> pixel center (x, y), clamping first."""
    loc = np.clip(np.asarray(loc, dtype=np.float64), -1.0, 1.0)
    px = (loc[..., 0] + 1.0) / 2.0 * (width - 1)
    py = (loc[..., 1] + 1.0) / 2.0 * (height - 1)
    return px, py


def extract_pyramid(pairs, locs):
    """Crop three centered patches (32/64/128 px) per sample and pool the
    larger two down to 32x32.  Out-of-image regions are zero filled.

    pairs: (B, 2, H, W) float array; locs: (B, 2) normalized.
    Returns [p1, p2, p3], each (B, 2, 32, 32) float32.
    """
    pairs = np.asarray(pairs, dtype=np.float32)
    b, c, h, w = pairs.shape
    px, py = loc_to_pixel(locs, w, h)
    cx = np.rint(px).astype(np.int64)
    cy = np.rint(py).astype(np.int64)
    pad = SCALES[-1] // 2
    padded = np.pad(pairs, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    batch_idx = np.arange(b)[:, None, None]
    out = []
    for s in SCALES:
        y0 = cy + pad - s // 2
        x0 = cx + pad - s // 2
        rows = y0[:, None] + np.arange(s)
        cols = x0[:, None] + np.arange(s)
        crop = padded[batch_idx, :, rows[:, :, None], cols[:, None, :]]  # (B, s, s, C)
        crop = crop.transpose(0, 3, 1, 2)
        f = s // PATCH
        if f > 1:
            crop = crop.reshape(b, c, PATCH, f, PATCH, f).mean(axis=(3, 5))
        out.append(np.ascontiguousarray(crop, dtype=np.float32))
    return out


@dataclass
class GlimpseNetConfig:
    channels_p1: tuple = (32, 32, 64, 64, 128, 128)   # 3x3 kernels, strides 1,2,1,2,1,2
    channels_p23: tuple = (32, 32, 64, 64)            # 5x5 kernels, strides 1,2,1,2
    glimpse_dim: int = 512


class GlimpseNet:
    """Per-scale conv stacks, feature concat, multiplicative location fusion."""

    def __init__(self, params: ParameterSet, prefix, cfg: GlimpseNetConfig, rng):
        self.cfg = cfg
        self.p1_stack = self._stack(params, f"{prefix}.p1", cfg.channels_p1, kernel=3, rng=rng)
        self.p2_stack = self._stack(params, f"{prefix}.p2", cfg.channels_p23, kernel=5, rng=rng)
        self.p3_stack = self._stack(params, f"{prefix}.p3", cfg.channels_p23, kernel=5, rng=rng)
        flat1 = cfg.channels_p1[-1] * (PATCH // 2 ** (len(cfg.channels_p1) // 2)) ** 2
        flat23 = cfg.channels_p23[-1] * (PATCH // 2 ** (len(cfg.channels_p23) // 2)) ** 2
        self.fc_what = Linear(params, f"{prefix}.what", flat1 + 2 * flat23, cfg.glimpse_dim, rng)
        self.fc_where = Linear(params, f"{prefix}.where", 2, cfg.glimpse_dim, rng)
        # start the multiplicative location gate near identity so features
        # pass through at every location from the first step
        self.fc_where.b.data[:] = 1.0

    @staticmethod
    def _stack(params, prefix, channels, kernel, rng):
        layers = []
        in_ch = 2
        for i, out_ch in enumerate(channels):
            stride = 2 if i % 2 == 1 else 1
            layers.append(Conv2d(params, f"{prefix}.conv{i}", in_ch, out_ch, kernel, stride, kernel // 2, rng))
            in_ch = out_ch
        return layers

    @staticmethod
    def _run_stack(stack, x):
        for conv in stack:
            x = T.relu(conv(x))
        if not np.all(np.isfinite(x.data)):
            raise FloatingPointError("non-finite glimpse activations")
        n = x.shape[0]
        return x.reshape(n, -1)

    def encode(self, pyramid, locs):
        """pyramid: three (B, 2, 32, 32) arrays; locs: (B, 2).  -> (B, D_g)."""
        dt = self.fc_what.w.dtype
        f1 = self._run_stack(self.p1_stack, Tensor(pyramid[0].astype(dt)))
        f2 = self._run_stack(self.p2_stack, Tensor(pyramid[1].astype(dt)))
        f3 = self._run_stack(self.p3_stack, Tensor(pyramid[2].astype(dt)))
        what = T.relu(self.fc_what(T.concat([f1, f2, f3], axis=1)))
        where = T.relu(self.fc_where(Tensor(np.asarray(locs, dtype=dt))))
        return what * where

    def __call__(self, pairs, locs):
        return self.encode(extract_pyramid(pairs, locs), locs)


def dump_glimpses(path, locations, pyramids):
    """Serialize per-step locations and pyramids for offline inspection."""
    arrays = {"locations": np.asarray(locations, dtype=np.float32)}
    for t, pyr in enumerate(pyramids):
        for s, p in zip(SCALES, pyr):
            arrays[f"step{t}_scale{s}"] = np.asarray(p, dtype=np.float32)
    np.savez_compressed(path, **arrays)
