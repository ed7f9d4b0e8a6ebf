"""Adam with bias correction, operating on a subset of a ParameterSet."""

from __future__ import annotations

import numpy as np


class Adam:
    def __init__(self, params, paths, lr, beta1=0.9, beta2=0.999, eps=1e-8,
                 clip_norm=None):
        self.params = params
        self.paths = list(paths)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm  # global L2 norm across all paths; None = off
        self.step_count = 0
        self.m = {p: np.zeros_like(params[p].data) for p in self.paths}
        self.v = {p: np.zeros_like(params[p].data) for p in self.paths}

    def _clip_scale(self):
        sq = 0.0
        for p in self.paths:
            g = self.params[p].grad
            if g is not None:
                sq += float(np.sum(g.astype(np.float64) ** 2))
        norm = np.sqrt(sq)
        if norm > self.clip_norm:
            return self.clip_norm / norm
        return 1.0

    def step(self):
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        scale = self._clip_scale() if self.clip_norm else 1.0
        for p in self.paths:
            tensor = self.params[p]
            g = tensor.grad
            if g is None:
                continue
            if g.shape != tensor.data.shape:
                raise ValueError(f"gradient shape mismatch for {p}: {g.shape} vs {tensor.data.shape}")
            if scale != 1.0:
                g = g * scale
            m = self.m[p]
            v = self.v[p]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            mhat = m / bc1
            vhat = v / bc2
            tensor.data = tensor.data - self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def zero_grad(self):
        for p in self.paths:
            self.params[p].grad = None

    def state(self):
        return {
            "step_count": self.step_count,
            "m": dict(self.m),
            "v": dict(self.v),
        }
