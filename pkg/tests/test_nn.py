import math

import numpy as np
import pytest

from conftest import check_gradients
from glimpsevo import tensor as T
from glimpsevo.nn import INITIALIZERS, LSTMLayer, Linear, ParameterSet, lstm_cell, orthogonal, uniform_fan_in
from glimpsevo.optim import Adam
from glimpsevo.tensor import Tensor


def _hand_lstm(x, h, c, wxi, wxf, wxg, wxo, whi, whf, whg, who, bi, bf, bg, bo):
    """Scalar reference evaluation of the gate equations."""
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    i = sig(wxi * x + whi * h + bi)
    f = sig(wxf * x + whf * h + bf)
    g = math.tanh(wxg * x + whg * h + bg)
    o = sig(wxo * x + who * h + bo)
    c_new = f * c + i * g
    return o * math.tanh(c_new), c_new


class TestLSTMCell:
    def _weights(self, vals, dtype=np.float64):
        wxi, wxf, wxg, wxo, whi, whf, whg, who, bi, bf, bg, bo = vals
        wx = Tensor(np.array([[wxi, wxf, wxg, wxo]], dtype=dtype), requires_grad=True)
        wh = Tensor(np.array([[whi, whf, whg, who]], dtype=dtype), requires_grad=True)
        b = Tensor(np.array([bi, bf, bg, bo], dtype=dtype), requires_grad=True)
        return wx, wh, b

    def test_zero_weights_zero_state(self):
        wx, wh, b = self._weights([0.0] * 12)
        x = Tensor(np.zeros((2, 1)))
        h0 = c0 = Tensor(np.zeros((2, 1)))
        h, c = lstm_cell(x, h0, c0, wx, wh, b, 1)
        assert np.array_equal(h.data, np.zeros((2, 1)))
        assert np.array_equal(c.data, np.zeros((2, 1)))

    def test_matches_hand_evaluation(self):
        vals = [0.5, -0.3, 0.8, 0.1, -0.2, 0.4, 0.3, -0.6, 0.05, -0.1, 0.2, 0.0]
        wx, wh, b = self._weights(vals)
        x_val, h_val, c_val = 0.7, -0.4, 0.25
        h, c = lstm_cell(Tensor(np.array([[x_val]])), Tensor(np.array([[h_val]])),
                         Tensor(np.array([[c_val]])), wx, wh, b, 1)
        h_ref, c_ref = _hand_lstm(x_val, h_val, c_val, *vals)
        assert abs(h.data[0, 0] - h_ref) < 1e-6
        assert abs(c.data[0, 0] - c_ref) < 1e-6

    def test_gradient_through_three_chained_cells(self, rng):
        wx, wh, b = self._weights(rng.uniform(-0.5, 0.5, 12))
        xs = [Tensor(rng.standard_normal((2, 1)), requires_grad=True) for _ in range(3)]

        def loss():
            h = c = Tensor(np.zeros((2, 1), dtype=np.float64))
            for x in xs:
                h, c = lstm_cell(x, h, c, wx, wh, b, 1)
            return T.square(h).sum()

        check_gradients(loss, [wx, wh, b] + xs, tol=1e-3, rng=rng)

    def test_nonfinite_gates_abort(self):
        wx, wh, b = self._weights([1.0] * 12)
        with pytest.raises(FloatingPointError):
            lstm_cell(Tensor(np.array([[np.inf]])), Tensor(np.zeros((1, 1))),
                      Tensor(np.zeros((1, 1))), wx, wh, b, 1)


class TestAdam:
    def test_zero_gradient_leaves_params(self):
        ps = ParameterSet()
        p = ps.add("p", np.array([1.0, -2.0]), "zeros")
        opt = Adam(ps, ["p"], lr=0.1)
        p.grad = np.zeros(2, dtype=np.float32)
        opt.step()
        assert np.array_equal(p.data, np.array([1.0, -2.0], dtype=np.float32))
        assert opt.step_count == 1

    def test_first_step_bias_corrected(self):
        ps = ParameterSet(dtype=np.float64)
        p = ps.add("p", np.array([1.0]), "zeros")
        opt = Adam(ps, ["p"], lr=0.1)
        p.grad = np.array([1.0])
        opt.step()
        assert abs(p.data[0] - 0.9) < 1e-7

    def test_converges_on_quadratic(self):
        ps = ParameterSet(dtype=np.float64)
        p = ps.add("p", np.array([1.0]), "zeros")
        opt = Adam(ps, ["p"], lr=0.1)
        for _ in range(100):
            p.grad = 2.0 * p.data
            opt.step()
        assert abs(p.data[0]) < 0.1
        assert opt.step_count == 100


class TestInitializers:
    def test_orthogonal_matrix(self, rng):
        for n in (4, 32, 256):
            q = orthogonal((n, n), rng, dtype=np.float64)
            assert np.abs(q.T @ q - np.eye(n)).max() < 1e-5

    def test_orthogonal_deterministic_per_seed(self):
        a = orthogonal((16, 16), np.random.default_rng(3))
        b = orthogonal((16, 16), np.random.default_rng(3))
        assert np.array_equal(a, b)

    def test_uniform_fan_in_bound(self, rng):
        w = uniform_fan_in((100, 50), 100, rng)
        assert np.abs(w).max() <= 0.1

    def test_parameter_paths_unique(self, rng):
        ps = ParameterSet()
        Linear(ps, "fc", 4, 3, rng)
        with pytest.raises(ValueError):
            Linear(ps, "fc", 4, 3, rng)
        assert set(ps.paths()) == {"fc.w", "fc.b"}
        assert ps.count() == 4 * 3 + 3
        assert ps.init_of("fc.b") == "zeros"

    def test_lstm_layer_recurrent_blocks_orthogonal(self, rng):
        ps = ParameterSet(dtype=np.float64)
        layer = LSTMLayer(ps, "lstm", 8, 16, rng)
        wh = ps["lstm.wh"].data
        for k in range(4):
            blk = wh[:, k * 16:(k + 1) * 16]
            assert np.abs(blk.T @ blk - np.eye(16)).max() < 1e-5

    def test_checkpoint_roundtrip_arrays(self, rng, tmp_path):
        from glimpsevo.checkpoint import load_checkpoint, save_checkpoint
        ps = ParameterSet()
        Linear(ps, "fc", 5, 2, rng)
        save_checkpoint(tmp_path / "c.npz", ps, {"note": "x"})
        arrays, meta = load_checkpoint(tmp_path / "c.npz")
        assert meta["note"] == "x"
        ps2 = ParameterSet()
        Linear(ps2, "fc", 5, 2, np.random.default_rng(999))
        ps2.load_arrays(arrays)
        assert np.array_equal(ps2["fc.w"].data, ps["fc.w"].data)
