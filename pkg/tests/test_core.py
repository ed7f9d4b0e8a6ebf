import numpy as np

from conftest import check_gradients
from glimpsevo.core import CoreNet
from glimpsevo.nn import ParameterSet
from glimpsevo.tensor import Tensor

from test_nn import _hand_lstm


def _core(width, glimpse_dim=8, seed=0, dtype=np.float32):
    ps = ParameterSet(dtype=dtype)
    return CoreNet(ps, "core", glimpse_dim, width, np.random.default_rng(seed)), ps


class TestInitState:
    def test_zero_vectors_width_256(self):
        core, _ = _core(256)
        s = core.init_state(3)
        for v in (s.h1, s.c1, s.h2, s.c2):
            assert v.shape == (3, 256)
            assert not v.data.any()

    def test_recurrent_weights_orthogonal(self):
        core, ps = _core(64, dtype=np.float64)
        for name in ("core.lstm1.wh", "core.lstm2.wh"):
            wh = ps[name].data
            for k in range(4):
                blk = wh[:, k * 64:(k + 1) * 64]
                assert np.abs(blk.T @ blk - np.eye(64)).max() < 1e-5

    def test_same_seed_identical(self):
        _, ps1 = _core(32, seed=42)
        _, ps2 = _core(32, seed=42)
        for p in ps1.paths():
            assert np.array_equal(ps1[p].data, ps2[p].data)


class TestStep:
    def test_zero_weights_state_stays_zero(self):
        core, ps = _core(16)
        for p in ps.paths():
            ps[p].data[:] = 0.0
        s = core.init_state(2)
        for _ in range(5):
            s = core.step(s, Tensor(np.ones((2, 8), dtype=np.float32)))
        assert not s.h.data.any()

    def test_two_steps_match_hand_evaluation(self):
        core, ps = _core(1, glimpse_dim=1, dtype=np.float64)
        rng = np.random.default_rng(3)
        vals = {p: rng.uniform(-0.6, 0.6, ps[p].data.shape) for p in ps.paths()}
        for p, v in vals.items():
            ps[p].data[:] = v
        xs = [0.4, -0.7]
        s = core.init_state(1, dtype=np.float64)
        for x in xs:
            s = core.step(s, Tensor(np.array([[x]])))

        def unpack(prefix):
            wx = vals[f"{prefix}.wx"][0]
            wh = vals[f"{prefix}.wh"][0]
            b = vals[f"{prefix}.b"]
            # gate order: input, forget, candidate, output
            return lambda x, h, c: _hand_lstm(x, h, c, wx[0], wx[1], wx[2], wx[3],
                                              wh[0], wh[1], wh[2], wh[3],
                                              b[0], b[1], b[2], b[3])

        l1 = unpack("core.lstm1")
        l2 = unpack("core.lstm2")
        h1 = c1 = h2 = c2 = 0.0
        for x in xs:
            h1, c1 = l1(x, h1, c1)
            h2, c2 = l2(h1, h2, c2)
        assert abs(s.h1.data[0, 0] - h1) < 1e-6
        assert abs(s.h2.data[0, 0] - h2) < 1e-6

    def test_gradient_through_glimpse_and_four_steps(self, rng):
        from glimpsevo.glimpse import GlimpseNet, GlimpseNetConfig
        ps = ParameterSet(dtype=np.float64)
        gcfg = GlimpseNetConfig((2, 2, 4, 4, 4, 4), (2, 2, 4, 4), 8)
        gnet = GlimpseNet(ps, "glimpse", gcfg, np.random.default_rng(1))
        core = CoreNet(ps, "core", 8, 4, np.random.default_rng(2))
        pairs = rng.standard_normal((1, 2, 48, 48)).astype(np.float32)
        locs = [rng.uniform(-0.5, 0.5, (1, 2)) for _ in range(4)]
        proj = Tensor(rng.standard_normal((1, 4)))

        def loss():
            s = core.init_state(1, dtype=np.float64)
            for loc in locs:
                s = core.step(s, gnet(pairs, loc))
            return (s.h * proj).sum()

        targets = [ps["glimpse.p1.conv0.w"], ps["glimpse.what.w"],
                   ps["core.lstm1.wx"], ps["core.lstm2.wh"]]
        check_gradients(loss, targets, tol=1e-3, sample=6, rng=rng)

    def test_state_depends_on_every_glimpse(self, rng):
        core, _ = _core(8, glimpse_dim=4, seed=1)
        gs = [rng.standard_normal((1, 4)).astype(np.float32) for _ in range(5)]

        def run(inputs):
            s = core.init_state(1)
            for g in inputs:
                s = core.step(s, Tensor(g))
            return s.h.data

        base = run(gs)
        for i in range(5):
            altered = list(gs)
            altered[i] = np.zeros_like(gs[i])
            assert np.abs(run(altered) - base).max() > 0

    def test_episode_isolation(self, rng):
        # init_state gives fresh zero state, so runs cannot leak
        core, _ = _core(8, glimpse_dim=4, seed=1)
        g = rng.standard_normal((1, 4)).astype(np.float32)
        s1 = core.step(core.init_state(1), Tensor(g))
        _ = core.step(s1, Tensor(rng.standard_normal((1, 4)).astype(np.float32)))
        s2 = core.step(core.init_state(1), Tensor(g))
        assert np.array_equal(s1.h.data, s2.h.data)
