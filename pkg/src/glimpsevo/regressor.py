"""Pose regression head and the supervised loss.

Two parallel fully connected stacks (rotation and translation), each
256 -> 64 -> 32 hidden with ReLU and a linear 3-wide output.  Predictions
live in normalized target space; the loss is

    L = (1/N) sum_i ||p_hat_i - p_i||^2 + k * ||phi_hat_i - phi_i||^2

with p the translation components and phi the Euler angles.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .nn import Linear, ParameterSet
from .tensor import Tensor


class Regressor:
    def __init__(self, params: ParameterSet, prefix, width, rng, hidden=(256, 64, 32)):
        self.rot_head = self._head(params, f"{prefix}.rot", width, hidden, rng)
        self.trans_head = self._head(params, f"{prefix}.trans", width, hidden, rng)

    @staticmethod
    def _head(params, prefix, width, hidden, rng):
        layers = []
        d = width
        for i, hdim in enumerate(hidden):
            layers.append(Linear(params, f"{prefix}.fc{i}", d, hdim, rng))
            d = hdim
        layers.append(Linear(params, f"{prefix}.out", d, 3, rng))
        return layers

    @staticmethod
    def _run(layers, h):
        x = h
        for lin in layers[:-1]:
            x = T.relu(lin(x))
        return layers[-1](x)

    def __call__(self, h):
        """-> (B, 6) prediction ordered (roll, pitch, yaw, x, y, z)."""
        rot = self._run(self.rot_head, h)
        trans = self._run(self.trans_head, h)
        return T.concat([rot, trans], axis=1)


def supervised_loss(pred, target, k=1.0):
    """Mean-over-batch squared position error plus k times squared angle error."""
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    tgt = target if isinstance(target, Tensor) else Tensor(np.asarray(target, dtype=pred.dtype))
    if pred.shape != tgt.shape or pred.shape[-1] != 6:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {tgt.shape}")
    diff = pred - tgt
    sq = T.square(diff)
    rot = sq[:, 0:3].sum(axis=1)
    pos = sq[:, 3:6].sum(axis=1)
    return (pos + k * rot).mean()
