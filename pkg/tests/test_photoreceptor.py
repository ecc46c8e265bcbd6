import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from csdvs.errors import ConfigError, DataError
from csdvs.photoreceptor import pr_init, pr_step
from oracles import first_order_response


def test_time_constant_100hz():
    st_ = pr_init(np.zeros((1, 1)), 100.0)
    assert st_.tau == pytest.approx(1.5915e-3, rel=1e-4)


def test_constant_frame_is_fixed_point():
    c = np.full((3, 4), -0.7)
    s = pr_init(c, 100.0)
    for _ in range(10):
        s = pr_step(s, c, 2e-3)
    assert np.array_equal(s.v_p, c)


def test_step_response_one_tau():
    s = pr_init(np.zeros((1, 1)), 100.0)
    s = pr_step(s, np.ones((1, 1)), s.tau)
    assert s.v_p[0, 0] == pytest.approx(1 - math.exp(-1), abs=1e-12)
    assert s.v_p[0, 0] == pytest.approx(0.6321, abs=1e-4)


def test_matches_exact_sample_and_hold():
    rng = np.random.default_rng(3)
    x = rng.normal(size=40)
    s = pr_init(np.zeros((1, 1)), 100.0)
    out = []
    for xi in x:
        s = pr_step(s, np.full((1, 1), xi), 1e-3)
        out.append(s.v_p[0, 0])
    np.testing.assert_allclose(out, first_order_response(x, 1e-3, s.tau, 0.0), rtol=1e-12, atol=1e-14)


def test_minus_3db_at_cutoff():
    fc = 100.0
    tau = 1 / (2 * math.pi * fc)
    dt = tau / 40
    t = np.arange(0, 40 / fc, dt)
    # sample-and-hold shifts the effective phase by dt/2 but keeps the gain to O(dt^2)
    x = np.sin(2 * math.pi * fc * t)
    s = pr_init(np.zeros((1, 1)), fc)
    out = np.empty(len(t))
    for k, xi in enumerate(x):
        s = pr_step(s, np.full((1, 1), xi), dt)
        out[k] = s.v_p[0, 0]
    tail = out[t >= 15 / fc]  # 25 periods after the transient
    amp = (tail.max() - tail.min()) / 2
    assert amp == pytest.approx(1 / math.sqrt(2), rel=0.01)


def test_bypass_is_identity():
    s = pr_init(np.zeros((2, 2)), 0.0, bypass=True)
    x = np.array([[1.0, -2.0], [3.0, 0.5]])
    assert np.array_equal(pr_step(s, x, 1e-3).v_p, x)


def test_rejects():
    with pytest.raises(ConfigError):
        pr_init(np.zeros((1, 1)), math.inf)
    with pytest.raises(ConfigError):
        pr_init(np.zeros((1, 1)), 0.0)
    with pytest.raises(DataError):
        pr_init(np.array([[np.nan]]), 100.0)
    with pytest.raises(ConfigError):
        pr_step(pr_init(np.zeros((1, 1)), 100.0), np.zeros((1, 1)), 0.0)


@given(dt=st.floats(1e-7, 10.0), target=st.floats(-5, 5), start=st.floats(-5, 5))
def test_monotone_no_overshoot(dt, target, start):
    s = pr_init(np.full((1, 1), start), 100.0)
    prev = start
    for _ in range(5):
        s = pr_step(s, np.full((1, 1), target), dt)
        v = s.v_p[0, 0]
        # moves toward the target, never past it
        assert abs(v - target) <= abs(prev - target) + 1e-15
        assert (v - target) * (start - target) >= 0
        prev = v


@given(dt=st.floats(1e-6, 1e-2))
def test_error_shrinks_by_exp_factor(dt):
    s = pr_init(np.zeros((1, 1)), 100.0)
    s2 = pr_step(s, np.ones((1, 1)), dt)
    assert 1 - s2.v_p[0, 0] == pytest.approx(math.exp(-dt / s.tau), rel=1e-9)
