"""Recurrent core: two stacked LSTM layers integrating the glimpse sequence.

State is reset to zero for every frame pair; only h2 (the top layer's hidden
vector) is exported downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import LSTMLayer, ParameterSet
from .tensor import Tensor


@dataclass
class CoreState:
    h1: Tensor
    c1: Tensor
    h2: Tensor
    c2: Tensor

    @property
    def h(self):
        """The exported internal state."""
        return self.h2


class CoreNet:
    def __init__(self, params: ParameterSet, prefix, glimpse_dim, width, rng):
        self.width = width
        self.layer1 = LSTMLayer(params, f"{prefix}.lstm1", glimpse_dim, width, rng)
        self.layer2 = LSTMLayer(params, f"{prefix}.lstm2", width, width, rng)

    def init_state(self, batch, dtype=np.float32):
        zeros = lambda: Tensor(np.zeros((batch, self.width), dtype=dtype))
        return CoreState(zeros(), zeros(), zeros(), zeros())

    def step(self, state: CoreState, g):
        h1, c1 = self.layer1(g, state.h1, state.c1)
        h2, c2 = self.layer2(h1, state.h2, state.c2)
        if not np.all(np.isfinite(h2.data)):
            raise FloatingPointError("non-finite core state")
        return CoreState(h1, c1, h2, c2)
