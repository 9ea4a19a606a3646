import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dithercomp.rounding import (
    DitherRounder,
    coprime_stride,
    dither_round,
    left_schedule,
    quantize_det,
    right_schedule,
    round_stochastic,
)
from dithercomp.rng import substream


def test_quantize_det_examples():
    assert quantize_det(1.4, 2) == 1
    assert quantize_det(-0.2, 3) == 0
    assert quantize_det(9.7, 3) == 7
    assert quantize_det(2.5, 3) == 3  # half rounds up
    assert quantize_det(76.5, 8) == 77  # not banker's rounding


def test_quantize_det_vector():
    out = quantize_det(np.array([-1.0, 0.49, 0.5, 300.0]), 4)
    assert np.array_equal(out, [0, 0, 1, 15])


def test_round_stochastic_integer_is_sure():
    assert all(round_stochastic(2.0, 3, substream(30, i)) == 2 for i in range(10))


def test_round_stochastic_mean_and_variance():
    g = substream(30, 1)
    draws = np.array([round_stochastic(0.5, 1, g) for _ in range(20000)])
    assert set(draws) <= {0, 1}
    assert abs(draws.mean() - 0.5) < 0.012
    assert draws.var() == pytest.approx(0.25, abs=0.01)


def test_round_stochastic_ceil_probability():
    g = substream(30, 2)
    draws = np.array([round_stochastic(2.7, 3, g) for _ in range(20000)])
    p3 = np.mean(draws == 3)
    sem = np.sqrt(0.7 * 0.3 / 20000)
    assert abs(p3 - 0.7) <= 3 * sem


def test_dither_round_zero_fraction():
    assert dither_round(2.0, 0, 5) == 2
    assert dither_round(2.0, 3, 5) == 2


def test_dither_round_full_cycle_half():
    # frac 0.5 on N=2: one sure pulse, zero residual -> outputs {3, 2}
    r = DitherRounder(2, side="left", rng=substream(31, 0))
    assert sorted(r.round(2.5) for _ in range(2)) == [2, 3]
    assert r.count == 2


def test_dither_round_cycle_mean():
    means = []
    for rep in range(3000):
        r = DitherRounder(10, side="right", rng=substream(31, rep))
        means.append(np.mean([r.round(2.35) for _ in range(10)]))
    means = np.array(means)
    sem = means.std(ddof=1) / np.sqrt(len(means))
    assert abs(means.mean() - 2.35) < 3.5 * sem


def test_dither_round_negative_alpha():
    # floor(-0.3) = -1, frac = 0.7; unclamped outputs in {-1, 0}
    g = substream(31, 77)
    draws = np.array([dither_round(-0.3, i, 1, rng=g) for i in range(4000)])
    assert set(draws) <= {-1, 0}
    assert abs(draws.mean() + 0.3) < 0.03
    # with k the rail clamps to 0
    clamped = np.array([dither_round(-0.3, i, 1, rng=g, k=2) for i in range(100)])
    assert set(clamped) <= {0}


def test_dither_round_index_reduced_mod_n():
    r1 = dither_round(1.5, 0, 2, rng=substream(31, 5))
    r2 = dither_round(1.5, 2, 2, rng=substream(31, 5))
    assert r1 == r2


def test_dither_round_sigma_shape_checked():
    with pytest.raises(ValueError):
        dither_round(1.5, 0, 4, sigma=np.array([0, 1]), rng=substream(31, 6))


def test_schedules_are_rotations():
    ls = left_schedule(10, substream(32, 0))
    diffs = np.diff(np.concatenate([ls, ls[:1]])) % 10
    assert np.all(diffs == 1)  # consecutive order
    rs = right_schedule(10, substream(32, 1))
    step = (rs[1] - rs[0]) % 10
    assert step == coprime_stride(10)
    assert np.array_equal(np.sort(rs), np.arange(10))


@given(st.integers(1, 500))
def test_coprime_stride_is_coprime(n):
    assert math.gcd(coprime_stride(n), n) == 1


def test_rounder_stateful_counter_and_k():
    r = DitherRounder(4, side="left", rng=substream(32, 2), k=2)
    outs = [r.round(2.0) for _ in range(3)]
    assert outs == [2, 2, 2] and r.count == 3
    assert all(0 <= r.round(v) <= 3 for v in (-9.0, 0.2, 77.0))


def test_rounder_custom_sigma_validated():
    with pytest.raises(ValueError):
        DitherRounder(4, sigma=np.array([0, 1, 1, 3]))
    r = DitherRounder(4, sigma=np.array([2, 0, 3, 1]), rng=substream(32, 3))
    assert np.array_equal(r.sigma, [2, 0, 3, 1])


def test_rounder_side_validated():
    with pytest.raises(ValueError):
        DitherRounder(4, side="middle")


def test_n1_degenerates_to_stochastic():
    """The single-position cycle reduces exactly to stochastic rounding."""
    g1, g2 = substream(33, 0), substream(33, 1)
    a = 4.3
    d = np.array([dither_round(a, i, 1, rng=g1) for i in range(30000)])
    s = np.array([round_stochastic(a, 4, g2) for _ in range(30000)])
    assert set(d) == set(s) == {4, 5}
    assert abs(np.mean(d == 5) - np.mean(s == 5)) < 0.012


@given(
    st.floats(-4.0, 20.0),
    st.floats(-4.0, 20.0),
    st.integers(1, 6),
)
@settings(max_examples=60, deadline=None)
def test_monotone_in_expectation(a1, a2, k):
    """E[round(a1)] <= E[round(a2)] when a1 <= a2, every mode."""
    if a1 > a2:
        a1, a2 = a2, a1
    assert quantize_det(a1, k) <= quantize_det(a2, k)
    g = substream(34, k)
    m1 = np.mean([round_stochastic(a1, k, g) for _ in range(300)])
    m2 = np.mean([round_stochastic(a2, k, g) for _ in range(300)])
    assert m1 <= m2 + 0.2  # Monte Carlo slack
    d1 = np.mean([dither_round(a1, i, 4, rng=g, k=k) for i in range(64)])
    d2 = np.mean([dither_round(a2, i, 4, rng=g, k=k) for i in range(64)])
    assert d1 <= d2 + 0.2


def test_deterministic_rounding_minimizes_grid_emse():
    """At any fixed x, Bernoulli-p rounding error p(1-2x)+x^2 is
    minimized by p = round(x): the deterministic choice."""
    for x in np.linspace(0.01, 0.99, 33):
        loss = lambda p: p * (1 - 2 * x) + x**2
        det_p = float(np.floor(x + 0.5))
        assert loss(det_p) <= min(loss(0.0), loss(1.0), loss(x)) + 1e-12
