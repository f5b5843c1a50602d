import math

import numpy as np
import pytest

from wsdfm import net
from wsdfm.core import InvalidArgument, NumericalFailure, ParseError, RngStream

from oracles import gradient_check

DIMS = net.NetDims(2, 128)


@pytest.fixture(scope="module")
def params():
    return net.init_params(DIMS, RngStream(0))


def test_dimensions():
    assert DIMS.input_dim == 2 * 128 + 16 and DIMS.output_dim == 256
    assert DIMS.layer_shapes() == [(272, 128), (128, 128), (128, 128), (128, 256)]


def test_time_features():
    f = net.time_features(np.array([0.0, 0.25, 0.8]))
    assert f.shape == (3, 16) and np.all(np.abs(f) <= 1)
    np.testing.assert_allclose(f[1, 1], 1.0)  # sin(2 pi / 4)
    np.testing.assert_allclose(f[0, 8:], 1.0)  # cos(0)
    # the two ends of the path stay distinguishable
    ends = net.time_features(np.array([1e-3, 1 - 1e-3]))
    assert np.abs(ends[0] - ends[1]).max() > 1.9


def test_zero_head_gives_uniform(params):
    x = np.array([[3, 100], [0, 127]])
    p = net.posterior(params, 0.3, x)
    np.testing.assert_allclose(p, 1 / 128, rtol=0, atol=1e-12)


def test_forward_deterministic_and_position_dependent():
    p = net.init_params(DIMS, RngStream(1), zero_head=False)
    x = np.array([[5, 90]])
    a = net.forward(p, 0.4, x)
    assert np.array_equal(a, net.forward(p, 0.4, x))
    assert not np.allclose(net.forward(p, 0.4, x[:, ::-1]), a)
    with pytest.raises(InvalidArgument):
        net.forward(p, 0.4, np.array([[1, 2, 3]]))
    with pytest.raises(InvalidArgument):
        net.forward(p, 1.5, x)


def test_softmax_rows_sum_to_one():
    g = np.random.default_rng(0)
    p = net.softmax(g.normal(0, 30, (50, 2, 128)))
    assert np.all(np.abs(p.sum(-1) - 1) < 1e-9)


def test_initial_loss_is_ln_v(params):
    g = np.random.default_rng(0)
    x = g.integers(0, 128, (64, 2))
    loss, _ = net.loss_and_grads(params, g.random(64), x, x)
    assert loss == pytest.approx(math.log(128), abs=1e-6)
    assert math.log(128) == pytest.approx(4.8520, abs=5e-5)


def test_saturated_logits_drive_loss_to_zero():
    dims = net.NetDims(2, 8, embed_dim=4, hidden_dim=8)
    p = net.init_params(dims, 0, dtype=np.float64)
    x1 = np.array([[3, 6]])
    p.arrays["b3"][:] = 0
    p.arrays["b3"][[3, 8 + 6]] = 60.0
    loss, _ = net.loss_and_grads(p, 0.5, x1, x1)
    assert loss < 1e-20


def test_nonfinite_loss_names_batch():
    dims = net.NetDims(2, 8, embed_dim=4, hidden_dim=8)
    p = net.init_params(dims, 0, dtype=np.float64)
    p.arrays["b3"][0] = np.nan
    with pytest.raises(NumericalFailure, match="batch 17"):
        net.loss_and_grads(p, 0.5, np.array([[0, 1]]), np.array([[0, 1]]), batch_index=17)


def test_loss_invariant_to_batch_order():
    dims = net.NetDims(2, 8, embed_dim=4, hidden_dim=8)
    p = net.init_params(dims, 2, dtype=np.float64, zero_head=False)
    g = np.random.default_rng(1)
    s, x, x1 = g.random(10), g.integers(0, 8, (10, 2)), g.integers(0, 8, (10, 2))
    perm = g.permutation(10)
    a, _ = net.loss_and_grads(p, s, x, x1)
    b, _ = net.loss_and_grads(p, s[perm], x[perm], x1[perm])
    assert a == pytest.approx(b, rel=1e-14)


def test_gradients_match_finite_differences():
    for seed in range(3):
        res = gradient_check(seed=seed)
        assert res["failures"] == 0 and res["entries"] > 1000


def _tiny():
    return net.init_params(net.NetDims(2, 8, embed_dim=4, hidden_dim=8), 0, dtype=np.float64,
                           zero_head=False)


def test_amsgrad_zero_gradient_is_fixed_point():
    p = _tiny()
    before = p.flat.copy()
    state = net.OptimizerState.zeros_like(p)
    zeros = {k: np.zeros_like(v) for k, v in p.arrays.items()}
    net.amsgrad_step(p, zeros, state, 1e-3)
    assert np.array_equal(p.flat, before)


def test_amsgrad_first_step_is_sign_times_lr():
    p = _tiny()
    before = p.flat.copy()
    g = np.random.default_rng(0)
    grads = {k: g.normal(0, 1, v.shape) for k, v in p.arrays.items()}
    flat_g = np.concatenate([grads[k].ravel() for k in p.arrays])
    state = net.OptimizerState.zeros_like(p)
    net.amsgrad_step(p, grads, state, 1e-3)
    # m_hat = g and v_hat = g^2 on the first step, so the update is lr * g / (|g| + eps)
    expected = before - 1e-3 * flat_g / (np.abs(flat_g) + 1e-8)
    np.testing.assert_allclose(p.flat, expected, rtol=1e-10, atol=1e-15)


def test_amsgrad_max_accumulator():
    p = _tiny()
    g = np.random.default_rng(0)
    state = net.OptimizerState.zeros_like(p)
    g1 = {k: g.normal(0, 3, v.shape) for k, v in p.arrays.items()}
    g2 = {k: g.normal(0, 0.1, v.shape) for k, v in p.arrays.items()}
    net.amsgrad_step(p, g1, state, 1e-3)
    v1 = state.v.copy()
    net.amsgrad_step(p, g2, state, 1e-3)
    np.testing.assert_array_equal(state.v_max, np.maximum(v1, state.v))
    assert state.step == 2


def test_checkpoint_round_trip(tmp_path, params):
    p = net.init_params(DIMS, RngStream(4), zero_head=False)
    path = tmp_path / "m.bin"
    net.save_checkpoint(path, p, iteration=12, t0=0.8, seed=4)
    q = net.load_checkpoint(path)
    assert all(np.array_equal(p.arrays[k], q.arrays[k]) for k in p.arrays)
    assert q.meta["iteration"] == 12 and q.meta["t0"] == 0.8
    raw = path.read_bytes()
    path.write_bytes(raw[:-4])
    with pytest.raises(ParseError):
        net.load_checkpoint(path)
