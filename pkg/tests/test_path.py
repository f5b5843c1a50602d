import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wsdfm.core import InvalidArgument, RngStream
from wsdfm.path import (LINEAR, ClockSaturated, KappaSchedule, WarmStartClock, check_rate,
                        conditional_rate, sample_xt, to_global_rate)
from wsdfm.sample import euler_probs


def test_schedule_endpoints_and_monotone():
    s = np.linspace(0, 1, 101)
    k = LINEAR.kappa(s)
    assert k[0] == 0.0 and k[-1] == 1.0 and np.all(np.diff(k) >= 0)
    assert np.all(LINEAR.kappa_dot(s) >= 0)
    with pytest.raises(InvalidArgument):
        KappaSchedule("cosine")


def test_sample_xt_endpoints():
    src = np.array([[1, 2], [3, 4]])
    dst = np.array([[5, 6], [7, 8]])
    assert np.array_equal(sample_xt(0.0, src, dst, rng=1), src)
    assert np.array_equal(sample_xt(1.0, src, dst, rng=1), dst)
    with pytest.raises(InvalidArgument):
        sample_xt(0.5, src, dst[:, :1])


def test_sample_xt_match_rate():
    n = 100_000
    src = np.zeros((n, 2), int)
    dst = np.ones((n, 2), int)
    x = sample_xt(0.5, src, dst, rng=RngStream(4))
    rate = (x == 1).mean(axis=0)
    assert np.all(np.abs(rate - 0.5) <= 3 * np.sqrt(0.25 / n))


def test_sample_xt_per_row_times():
    src = np.zeros((3, 2), int)
    dst = np.ones((3, 2), int)
    x = sample_xt(np.array([0.0, 1.0, 0.0]), src, dst, rng=0)
    assert x.tolist() == [[0, 0], [1, 1], [0, 0]]


def test_conditional_rate_examples():
    r = conditional_rate(0.3, np.array([2, 5]), np.array([2, 5]), vocab=8)
    assert np.all(r == 0)
    r = conditional_rate(0.5, np.array([1]), np.array([4]), vocab=8)[0]
    expected = np.zeros(8)
    expected[4], expected[1] = 2.0, -2.0
    np.testing.assert_array_equal(r, expected)
    assert LINEAR.coefficient(0.9) == pytest.approx(10.0)


def test_clock_guard():
    with pytest.raises(ClockSaturated):
        conditional_rate(1.0 - 1e-7, np.array([0]), np.array([1]), vocab=2)
    conditional_rate(1.0 - 2e-6, np.array([0]), np.array([1]), vocab=2)


def test_global_rate_examples():
    r = conditional_rate(0.5, np.array([0]), np.array([1]), vocab=3)
    assert np.array_equal(to_global_rate(r, WarmStartClock(0.0)), r)
    g = to_global_rate(r, WarmStartClock(0.8))
    assert g[0, 1] == pytest.approx(10.0)
    # global time of s=0.5 is 0.9, and 1/(1-0.9) = 10
    assert WarmStartClock(0.8).global_time(0.5) == pytest.approx(0.9)
    assert np.all(to_global_rate(np.zeros((2, 3)), WarmStartClock(0.5)) == 0)


def test_clock_maps_interval():
    c = WarmStartClock(0.35)
    assert c.local_time(0.35) == 0.0 and c.local_time(1.0) == pytest.approx(1.0)
    assert c.ds_dt == pytest.approx(1 / 0.65)
    with pytest.raises(InvalidArgument):
        WarmStartClock(1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 0.999), st.integers(2, 16), st.integers(0, 2**31 - 1))
def test_rate_conservative_and_kernel_valid(s, vocab, seed):
    g = np.random.default_rng(seed)
    x = g.integers(0, vocab, 5)
    x1 = g.integers(0, vocab, 5)
    r = conditional_rate(s, x, x1, vocab=vocab)
    check_rate(r, x)
    h = 1.0 / max(np.abs(r).max(), 1.0)
    p = np.eye(vocab)[x] + h * r
    assert np.all(p >= -1e-12) and np.allclose(p.sum(-1), 1.0, atol=1e-9)


def test_marginal_consistency_forward_simulation():
    """Simulated CTMC with the pinned rate matches the mixture marginal."""
    V, n, h = 6, 100_000, 0.001
    src, dst = 2, 5
    gen = RngStream(11, "kolmogorov").generator()
    x = np.full(n, src)
    checkpoints = {250: 0.25, 500: 0.5, 750: 0.75}
    for k in range(750):
        s = k * h
        # only tokens off the target can jump, with probability h * coef
        jump = (x != dst) & (gen.random(n) < h * float(LINEAR.coefficient(s)))
        x = np.where(jump, dst, x)
        if k + 1 in checkpoints:
            kap = checkpoints[k + 1]
            emp = np.bincount(x, minlength=V) / n
            target = np.zeros(V)
            target[src], target[dst] = 1 - kap, kap
            assert 0.5 * np.abs(emp - target).sum() < 0.02


@given(st.floats(0.0, 0.9), st.floats(0.0, 0.95), st.floats(1e-3, 0.05))
def test_time_warp_equivalence(t0, s, h):
    g = np.random.default_rng(0)
    x = g.integers(0, 8, (4, 2))
    x1 = g.integers(0, 8, (4, 2))
    clock = WarmStartClock(t0)
    r = conditional_rate(s, x, x1, vocab=8)
    a = euler_probs(x, to_global_rate(r, clock), h)
    b = euler_probs(x, r, h / (1 - t0))
    np.testing.assert_allclose(a, b, atol=1e-12, rtol=0)
