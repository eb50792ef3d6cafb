import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from exoportrait.metrics import (
    DegenerateProfileError,
    block_interaction,
    block_muscle_effort,
    grf_correlation,
    interaction_stride,
    interaction_strides,
    muscle_effort_stride,
    muscle_effort_strides,
    pearson,
    vo2_baseline,
    vo2_normalize,
)
from exoportrait.sigproc import CoverageError, Stride, segment_strides

T1 = Stride(0, 0.0, 1.0)


def grid(n=2001, end=1.0):
    return np.linspace(0.0, end, n)


def test_muscle_effort_stride_examples():
    t = grid()
    assert muscle_effort_stride(np.full((len(t), 1), 0.5), t, T1)[0] == pytest.approx(0.25)
    e = np.abs(np.sin(2 * np.pi * t))[:, None]
    assert muscle_effort_stride(e, t, T1)[0] == pytest.approx(0.5, abs=1e-6)
    assert muscle_effort_stride(np.zeros((len(t), 2)), t, T1).tolist() == [0.0, 0.0]


def test_block_effort_examples():
    per, total = block_muscle_effort([[0.2], [0.5]], [1.0, 2.0], [1.0])
    assert per[0] == pytest.approx(1.2)
    mu = np.array([[0.1, 0.4, 0.7]])
    _, total = block_muscle_effort(mu, [1.0], [2.0, 2.0, 2.0])
    assert total == pytest.approx(0.4)
    _, total = block_muscle_effort([[0.3, 0.0, 0.0]], [1.0], [5.0, 3.0, 2.0])
    assert total == pytest.approx(5.0 * 0.3 / 10.0)


def test_interaction_examples():
    t = grid()
    assert interaction_stride(np.full((len(t), 4), -2.0), t, T1).tolist() == pytest.approx([2.0] * 4)
    u = np.sin(2 * np.pi * t)[:, None]
    assert interaction_stride(u, t, T1)[0] == pytest.approx(2 / math.pi, abs=1e-6)
    assert interaction_stride(np.zeros((len(t), 4)), t, T1).tolist() == [0.0] * 4
    per, total = block_interaction([[1.0, 2.0, 3.0, 4.0], [3.0, 2.0, 1.0, 0.0]], [1.0, 1.0])
    assert per.tolist() == [4.0, 4.0, 4.0, 4.0] and total == 4.0


def test_stride_ends_between_samples_are_interpolated():
    t = np.linspace(0, 2, 21)  # 0.1 s samples
    u = t[:, None]  # ramp: mean over [a, b] is (a + b) / 2
    val = interaction_stride(u, t, Stride(0, 0.33, 1.27))[0]
    assert val == pytest.approx((0.33 + 1.27) / 2, rel=1e-12)


def test_coverage_gap_is_an_error():
    t = grid()
    with pytest.raises(CoverageError):
        interaction_stride(np.ones((len(t), 4)), t, Stride(3, 0.5, 1.5))


@given(alpha=st.floats(0.1, 10), seed=st.integers(0, 10_000))
def test_effort_scales_with_the_square_of_the_envelope(alpha, seed):
    rng = np.random.default_rng(seed)
    t = grid(401, 3.0)
    env = rng.uniform(0, 1, (len(t), 3))
    strides = segment_strides([0.0, 1.1, 2.0, 3.0])
    mu = muscle_effort_strides(env, t, strides)
    mu2 = muscle_effort_strides(alpha * env, t, strides)
    assert np.allclose(mu2, alpha ** 2 * mu, rtol=1e-10)
    T = [s.duration for s in strides]
    w = [1.0, 2.0, 3.0]
    a = block_muscle_effort(mu, T, w)[1]
    b = block_muscle_effort(mu2, T, w)[1]
    assert b == pytest.approx(alpha ** 2 * a, rel=1e-10)


@given(seed=st.integers(0, 10_000))
def test_totals_ignore_stride_order(seed):
    rng = np.random.default_rng(seed)
    tau = rng.uniform(0, 5, (8, 4))
    mu = rng.uniform(0, 1, (8, 14))
    T = rng.uniform(0.8, 1.6, 8)
    p = rng.permutation(8)
    assert block_interaction(tau[p], T[p])[1] == pytest.approx(block_interaction(tau, T)[1])
    w = rng.uniform(1, 5, 14)
    assert block_muscle_effort(mu[p], T[p], w)[1] == pytest.approx(block_muscle_effort(mu, T, w)[1])


def test_vo2_examples():
    hat, totals = vo2_normalize([12.0], [0.6], {0.6: 10.0})
    assert hat[0] == pytest.approx(1.2)
    _, totals = vo2_normalize([10.0] * 7, [0.4] * 7, {0.4: 10.0})
    assert totals[0.4] == pytest.approx(7.0)
    hat, totals = vo2_normalize(np.empty(0), np.empty(0), {0.4: 10.0})
    assert hat.size == 0 and sum(totals.values()) == 0
    with pytest.raises(KeyError):
        vo2_normalize([10.0], [0.8], {0.4: 10.0})
    assert vo2_baseline([1.0, 3.0, 5.0], [0.4, 0.4, 0.6]) == {0.4: 2.0, 0.6: 5.0}


@given(k=st.floats(0.01, 100), seed=st.integers(0, 1000))
def test_vo2_normalisation_is_scale_free(k, seed):
    rng = np.random.default_rng(seed)
    eta = rng.uniform(5, 20, 10)
    v = np.repeat([0.4, 0.6], 5)
    base = {0.4: 9.0, 0.6: 11.0}
    a, ta = vo2_normalize(eta, v, base)
    b, tb = vo2_normalize(k * eta, v, {s: k * x for s, x in base.items()})
    assert np.allclose(a, b, rtol=1e-12)


def test_grf_correlation_examples():
    ref = np.sin(np.linspace(0, np.pi, 101)) + 0.2 * np.linspace(0, 1, 101)
    r = grf_correlation(np.stack([ref, -ref]), ref)
    assert r == pytest.approx([1.0, -1.0])
    with pytest.raises(DegenerateProfileError, match="degenerate profile"):
        grf_correlation(np.ones((1, 101)), ref)


def test_grf_correlation_under_noise_matches_attenuation(rng):
    snr = 10.0
    ref = np.sin(np.linspace(0, 2 * np.pi, 101))
    sd = ref.std() / snr
    r = grf_correlation(ref + sd * rng.standard_normal((2000, 101)), ref)
    assert r.mean() == pytest.approx(1 / math.sqrt(1 + 1 / snr ** 2), rel=0.03)


@given(a=st.floats(0.1, 10), b=st.floats(-10, 10), seed=st.integers(0, 1000))
def test_pearson_affine_invariance(a, b, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=50), rng.normal(size=50)
    assert pearson(a * x + b, y) == pytest.approx(pearson(x, y), abs=1e-9)
    assert pearson(x, a * y + b) == pytest.approx(pearson(x, y), abs=1e-9)
