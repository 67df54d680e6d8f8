import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from fedts.mechanism import (Broadcast, DpParams, aggregate, clip, clip_stats, noise_std,
                             subsample)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def random_weights(rng, p, n):
    w = rng.uniform(size=(p, n))
    return w / w.sum(axis=1, keepdims=True)


def test_full_participation():
    np.testing.assert_array_equal(subsample(7, 1.0, np.random.default_rng(0)), np.arange(7))


def test_subsample_size_binomial_moments():
    rng = np.random.default_rng(0)
    sizes = np.array([len(subsample(200, 0.25, rng)) for _ in range(10_000)])
    se = math.sqrt(200 * 0.25 * 0.75 / 10_000)
    assert abs(sizes.mean() - 50) < 3 * se
    assert sizes.var() == pytest.approx(200 * 0.25 * 0.75, rel=0.05)


def test_subsample_deterministic_given_seed():
    a = subsample(100, 0.3, np.random.default_rng(42))
    b = subsample(100, 0.3, np.random.default_rng(42))
    np.testing.assert_array_equal(a, b)


def test_clip_examples():
    np.testing.assert_allclose(clip([3.0, 4.0], 2.5, 1), [1.5, 2.0])
    np.testing.assert_array_equal(clip([3.0, 4.0], 5.0 * math.sqrt(2), 2), [3.0, 4.0])
    np.testing.assert_array_equal(clip([0.0, 0.0], 1.0), [0.0, 0.0])


@settings(max_examples=100, deadline=None)
@given(omega=hnp.arrays(float, st.integers(1, 20), elements=finite),
       s=st.floats(0.01, 100), p=st.integers(1, 8))
def test_clip_bounds_norm_and_keeps_direction(omega, s, p):
    out = clip(omega, s, p)
    bound = s / math.sqrt(p)
    norm = np.linalg.norm(omega)
    assert np.linalg.norm(out) <= bound * (1 + 1e-12)
    if norm <= bound:
        np.testing.assert_array_equal(out, omega)
    else:
        np.testing.assert_allclose(out * norm / bound, omega, rtol=1e-9, atol=1e-12)


def test_noise_std_formula():
    assert noise_std(DpParams(0.25, 0.0, 11.0, 2), 0.5) == 0.0
    assert noise_std(DpParams(0.25, 1.0, 11.0, 2), 0.5) == pytest.approx(22.0)


def test_params_validation():
    with pytest.raises(ValueError):
        DpParams(q=0.0)
    with pytest.raises(ValueError):
        DpParams(z=1.0, clip=math.inf)
    with pytest.raises(ValueError):
        DpParams(clip=0.0)


def test_plain_average_when_mechanism_is_trivial():
    rng = np.random.default_rng(3)
    vecs = rng.normal(size=(50, 8))
    params = DpParams(1.0, 0.0, math.inf, 1)
    bc, stats = aggregate(vecs, np.arange(50), np.full((1, 50), 1 / 50), params)
    assert np.max(np.abs(bc.per_region[0] - vecs.mean(axis=0))) <= 1e-12
    assert stats.fraction == 0.0


def test_empty_selection_gives_zero_broadcast():
    params = DpParams(0.5, 0.0, 3.0, 2)
    bc, _ = aggregate(np.ones((4, 3)), [], np.full((2, 4), 0.25), params)
    np.testing.assert_array_equal(bc.per_region, np.zeros((2, 3)))


def test_hand_computed_weighted_sum():
    params = DpParams(1.0, 0.0, math.inf, 1)
    bc, _ = aggregate([[1.0, 0.0], [0.0, 1.0]], [0, 1], [[0.8, 0.2]], params)
    np.testing.assert_allclose(bc.per_region[0], [0.8, 0.2])


def test_injected_noise_std():
    params = DpParams(0.25, 1.0, 11.0, 2)
    w = np.array([[0.5, 0.5], [0.5, 0.5]])
    bc, _ = aggregate(np.zeros((2, 50_000)), [], w, params, np.random.default_rng(0))
    samples = bc.per_region.ravel()
    assert samples.size == 100_000
    assert samples.std() == pytest.approx(22.0, rel=0.02)
    assert abs(np.corrcoef(bc.per_region)[0, 1]) < 0.02


def test_noise_requires_rng():
    with pytest.raises(ValueError):
        aggregate(np.zeros((2, 3)), [0], np.full((1, 2), 0.5), DpParams(1.0, 1.0, 1.0, 1))


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError, match="weight matrix"):
        aggregate(np.zeros((3, 2)), [0], np.full((1, 2), 0.5), DpParams())


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 30), m=st.integers(1, 10), p=st.integers(1, 4),
       s=st.floats(0.1, 10), seed=st.integers(0, 2**31))
def test_joint_clipped_vector_norm_bound(n, m, p, s, seed):
    rng = np.random.default_rng(seed)
    vecs = rng.normal(scale=5, size=(n, m))
    w = random_weights(rng, p, n)
    for k in range(n):
        # one agent's contribution stacked over all regions
        joint = np.concatenate([n * w[i, k] * clip(vecs[k], s, p) for i in range(p)])
        assert np.linalg.norm(joint) <= n * w.max() * s * (1 + 1e-9)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 20), m=st.integers(1, 6), p=st.integers(1, 3),
       a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 2**31))
def test_noiseless_aggregate_is_linear(n, m, p, a, b, seed):
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=(n, m)), rng.normal(size=(n, m))
    w = random_weights(rng, p, n)
    params = DpParams(1.0, 0.0, math.inf, p)
    sel = np.arange(n)
    lhs = aggregate(a * u + b * v, sel, w, params)[0].per_region
    rhs = a * aggregate(u, sel, w, params)[0].per_region + b * aggregate(v, sel, w, params)[0].per_region
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 20), q=st.floats(0.1, 1.0), seed=st.integers(0, 2**31))
def test_zero_weight_agent_does_not_change_broadcast(n, q, seed):
    rng = np.random.default_rng(seed)
    vecs = rng.normal(size=(n + 1, 4))
    w = np.hstack([random_weights(rng, 2, n), np.zeros((2, 1))])
    params = DpParams(q, 0.0, 2.0, 2)
    sel = np.flatnonzero(rng.random(n) < q)
    without = aggregate(vecs, sel, w, params)[0].per_region
    with_extra = aggregate(vecs, np.append(sel, n), w, params)[0].per_region
    np.testing.assert_allclose(with_extra, without, atol=1e-12)


def test_subsampled_average_is_unbiased():
    rng = np.random.default_rng(7)
    n, q = 30, 0.3
    vecs = rng.normal(size=(n, 5))
    w = random_weights(rng, 2, n)
    params = DpParams(q, 0.0, math.inf, 2)
    draws = np.array([aggregate(vecs, subsample(n, q, rng), w, params)[0].per_region
                      for _ in range(10_000)])
    target = w @ vecs
    se = draws.std(axis=0) / math.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - target) < 4 * se)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 20), p=st.integers(1, 4), seed=st.integers(0, 2**31))
def test_clip_stats(n, p, seed):
    rng = np.random.default_rng(seed)
    vecs = rng.normal(scale=3, size=(n, 6))
    assert clip_stats(vecs, DpParams(1.0, 0.0, math.inf, p)).fraction == 0.0
    stats = clip_stats(vecs, DpParams(1.0, 0.0, 5.0, p))
    norms = np.linalg.norm(vecs, axis=1)
    assert set(stats.clipped) == set(np.flatnonzero(norms > 5.0 / math.sqrt(p)))
    assert 0.0 <= stats.fraction <= 1.0


def test_noise_streams_are_per_region():
    params = DpParams(1.0, 1.0, 1.0, 3)
    w = np.full((3, 2), 0.5)
    a, _ = aggregate(np.zeros((2, 4)), [0, 1], w, params, np.random.default_rng(5))
    children = np.random.default_rng(5).spawn(3)
    for i, child in enumerate(children):
        np.testing.assert_allclose(a.per_region[i], 0.5 * child.standard_normal(4))


def test_broadcast_round_trip():
    bc = Broadcast(np.arange(6.0).reshape(2, 3), round=4)
    back = Broadcast.from_dict(bc.to_dict())
    np.testing.assert_array_equal(back.per_region, bc.per_region)
    assert back.round == 4 and bc.to_dict()["P"] == 2 and bc.to_dict()["M"] == 3
