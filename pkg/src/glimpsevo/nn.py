"""Parameter management, initializers, and the layers built on the tape.

A ParameterSet is a flat map from dotted path -> Tensor, each entry tagged
with the initializer that produced it so checkpoints and re-builds agree.
Layers are thin: they allocate parameters into a shared set under a prefix
and expose a forward over Tensors.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor

INITIALIZERS = ("uniform_fan_in", "orthogonal", "zeros")


def uniform_fan_in(shape, fan_in, rng, dtype=np.float32):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def orthogonal(shape, rng, dtype=np.float32):
    """Orthogonal matrix init; for non-square shapes the rows/cols that fit
    are orthonormal.  ||Q^T Q - I||_inf < 1e-5 holds for square matrices."""
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))  # deterministic sign convention
    if rows < cols:
        q = q.T
    return q[:rows, :cols].astype(dtype)


class ParameterSet:
    """Named trainable parameters with per-entry initializer metadata."""

    def __init__(self, dtype=np.float32):
        self.dtype = dtype
        self._params = {}   # path -> Tensor
        self._inits = {}    # path -> initializer name

    def add(self, path, array, init):
        if path in self._params:
            raise ValueError(f"duplicate parameter path: {path}")
        if init not in INITIALIZERS:
            raise ValueError(f"unknown initializer {init!r}")
        t = Tensor(np.asarray(array, dtype=self.dtype), requires_grad=True)
        self._params[path] = t
        self._inits[path] = init
        return t

    def __getitem__(self, path):
        return self._params[path]

    def __contains__(self, path):
        return path in self._params

    def __iter__(self):
        return iter(self._params)

    def items(self):
        return self._params.items()

    def paths(self, prefix=None):
        if prefix is None:
            return list(self._params)
        return [p for p in self._params if p.startswith(prefix)]

    def init_of(self, path):
        return self._inits[path]

    def count(self, prefix=None):
        return sum(self._params[p].size for p in self.paths(prefix))

    def zero_grad(self, prefix=None):
        for p in self.paths(prefix):
            self._params[p].grad = None

    def state_arrays(self):
        return {p: t.data for p, t in self._params.items()}

    def load_arrays(self, arrays):
        for p, t in self._params.items():
            if p not in arrays:
                raise KeyError(f"checkpoint missing parameter {p}")
            a = np.asarray(arrays[p], dtype=self.dtype)
            if a.shape != t.data.shape:
                raise ValueError(f"shape mismatch for {p}: {a.shape} vs {t.data.shape}")
            t.data = a.copy()


class Linear:
    def __init__(self, params: ParameterSet, prefix, in_dim, out_dim, rng):
        self.w = params.add(f"{prefix}.w", uniform_fan_in((in_dim, out_dim), in_dim, rng, params.dtype), "uniform_fan_in")
        self.b = params.add(f"{prefix}.b", np.zeros(out_dim), "zeros")

    def __call__(self, x):
        return T.matmul(x, self.w) + self.b


class Conv2d:
    def __init__(self, params: ParameterSet, prefix, in_ch, out_ch, kernel, stride, padding, rng):
        fan_in = in_ch * kernel * kernel
        self.w = params.add(f"{prefix}.w", uniform_fan_in((out_ch, in_ch, kernel, kernel), fan_in, rng, params.dtype), "uniform_fan_in")
        self.b = params.add(f"{prefix}.b", np.zeros(out_ch), "zeros")
        self.stride = stride
        self.padding = padding

    def __call__(self, x):
        return T.conv2d(x, self.w, self.b, stride=self.stride, padding=self.padding)


def lstm_cell(x, h_prev, c_prev, wx, wh, b, hidden):
    """One LSTM step.  Gate layout along the 4H axis: input, forget,
    candidate, output.  Raises on non-finite activations."""
    gates = T.matmul(x, wx) + T.matmul(h_prev, wh) + b
    if not np.all(np.isfinite(gates.data)):
        raise FloatingPointError("non-finite LSTM gate activations")
    i = T.sigmoid(gates[:, 0 * hidden : 1 * hidden])
    f = T.sigmoid(gates[:, 1 * hidden : 2 * hidden])
    g = T.tanh(gates[:, 2 * hidden : 3 * hidden])
    o = T.sigmoid(gates[:, 3 * hidden : 4 * hidden])
    c = f * c_prev + i * g
    h = o * T.tanh(c)
    return h, c


class LSTMLayer:
    """Single LSTM layer; recurrent weights orthogonally initialized."""

    def __init__(self, params: ParameterSet, prefix, in_dim, hidden, rng):
        self.hidden = hidden
        self.wx = params.add(f"{prefix}.wx", uniform_fan_in((in_dim, 4 * hidden), in_dim, rng, params.dtype), "uniform_fan_in")
        wh = np.concatenate([orthogonal((hidden, hidden), rng, params.dtype) for _ in range(4)], axis=1)
        self.wh = params.add(f"{prefix}.wh", wh, "orthogonal")
        self.b = params.add(f"{prefix}.b", np.zeros(4 * hidden), "zeros")

    def __call__(self, x, h_prev, c_prev):
        return lstm_cell(x, h_prev, c_prev, self.wx, self.wh, self.b, self.hidden)
