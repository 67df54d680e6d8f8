import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fedts.domain import Assignment, assign_agents
from fedts.weights import WeightSchedule, softmax_weights, temperature, weights

SYNTH = WeightSchedule.preset("synthetic")


def test_synthetic_profile():
    got = [SYNTH.a_t(t) for t in range(1, 12)]
    assert got == [16.0] * 6 + [12.25, 8.5, 4.75, 1.0, 1.0]


def test_synthetic_temperatures():
    assert temperature(3, SYNTH) == 1.0
    assert temperature(8, SYNTH) == pytest.approx(2.0)
    assert math.isinf(temperature(10, SYNTH))
    assert math.isinf(temperature(11, SYNTH))


def test_real_preset_profile():
    real = WeightSchedule.preset("real")
    assert real.a_t(10) == 16 and real.a_t(11) == 16
    assert real.a_t(40) == 1 and real.a_t(41) == 1
    vals = [real.a_t(t) for t in range(11, 41)]
    np.testing.assert_allclose(np.diff(vals), -15 / 29)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(0.5, 50), hold=st.integers(0, 20), decay=st.integers(1, 40))
def test_profile_bounded_and_nonincreasing(a, hold, decay):
    sched = WeightSchedule(a, hold, decay)
    vals = [sched.a_t(t) for t in range(1, hold + decay + 5)]
    assert all(v >= 1 for v in vals)
    assert all(b <= a_ for a_, b in zip(vals, vals[1:]))
    assert vals[-1] == 1


def test_infinite_temperature_is_uniform():
    ind = np.array([[1.0, 0, 0], [0, 1.0, 1.0]])
    np.testing.assert_array_equal(softmax_weights(ind, 15.0, math.inf), np.full((2, 3), 1 / 3))


def test_two_agent_softmax():
    asg = Assignment(np.array([0, 1]), 2)
    w = weights(asg, 1, SYNTH).values
    np.testing.assert_allclose(np.diag(w), 1 / (1 + math.exp(-15)), rtol=1e-14)


def test_assigned_to_unassigned_ratio():
    asg = assign_agents(200, 2, np.random.default_rng(0))
    w = weights(asg, 1, SYNTH).values
    ind = asg.indicator()
    for i in range(2):
        assert w[i, ind[i] > 0][0] / w[i, ind[i] == 0][0] == pytest.approx(math.exp(15),
                                                                           rel=1e-12)


@settings(max_examples=80, deadline=None)
@given(n=st.integers(1, 120), p=st.integers(1, 8), t=st.integers(1, 30),
       kind=st.sampled_from(["adaptive", "fixed-temperature", "uniform", "proportional"]),
       seed=st.integers(0, 2**31))
def test_rows_stochastic_and_exchangeable(n, p, t, kind, seed):
    asg = assign_agents(n, p, np.random.default_rng(seed))
    wm = weights(asg, t, WeightSchedule(kind=kind))
    w = wm.values
    assert w.shape == (p, n)
    np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(w > 0)
    assert 1 / n - 1e-15 <= wm.phi_max <= 1.0
    if n > 1:
        assert wm.phi_max < 1.0
    ind = asg.indicator() > 0
    for i in range(p):
        for group in (w[i, ind[i]], w[i, ~ind[i]]):
            if len(group):
                assert np.ptp(group) == 0


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 100), p=st.integers(1, 4), t=st.integers(11, 200),
       seed=st.integers(0, 2**31))
def test_uniform_after_decay(n, p, t, seed):
    asg = assign_agents(n, p, np.random.default_rng(seed))
    assert np.max(np.abs(weights(asg, t, SYNTH).values - 1 / n)) == 0


def test_fixed_temperature_constant_over_time():
    asg = assign_agents(20, 2, np.random.default_rng(1))
    sched = WeightSchedule(kind="fixed-temperature")
    first = weights(asg, 1, sched).values
    for t in range(2, 41):
        np.testing.assert_array_equal(weights(asg, t, sched).values, first)


def test_uniform_kind_is_uniform_every_round():
    asg = assign_agents(20, 4, np.random.default_rng(1))
    for t in range(1, 15):
        np.testing.assert_array_equal(weights(asg, t, WeightSchedule(kind="uniform")).values,
                                      1 / 20)


def test_large_sharpness_does_not_overflow():
    ind = np.array([[1.0, 0.0, 0.0]])
    with np.errstate(over="raise", invalid="raise"):
        w = softmax_weights(ind, 1000.0, 1.0)
    assert np.all(np.isfinite(w))
    np.testing.assert_allclose(w.sum(), 1.0)
    assert w[0, 0] == 1.0


def test_schedule_validation():
    with pytest.raises(ValueError):
        WeightSchedule(kind="weird")
    with pytest.raises(ValueError):
        WeightSchedule.preset("unknown")
    with pytest.raises(ValueError):
        temperature(0, SYNTH)
