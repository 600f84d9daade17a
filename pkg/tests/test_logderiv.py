import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nanomoments.ensembles import AngleSample, EnsembleSpec, Family, sample
from nanomoments.logderiv import (Cutoff, EvalPoint, cutoff_c, decompose, decompose_angles, log_deriv,
                                  log_deriv_angles, log_deriv_batch, log_deriv_many, window_count)
from nanomoments.numkernel import RngStream

angles_u = st.lists(st.floats(-math.pi, math.pi, allow_nan=False), min_size=1, max_size=40)
angles_p = st.lists(st.floats(1e-9, math.pi - 1e-9), min_size=1, max_size=40)


def test_eval_point():
    p = EvalPoint(0.5, 10)
    assert p.z == pytest.approx(0.95)
    assert p.z0 == pytest.approx(0.9)
    for bad in [(0.0, 10), (10.0, 10), (0.5, 0)]:
        with pytest.raises(ValueError):
            EvalPoint(*bad)


def test_cutoff_examples():
    assert cutoff_c(1e-4, 2).c == pytest.approx(0.1, rel=1e-12)
    assert cutoff_c(1e-2, 3).c == pytest.approx(0.21544, rel=1e-4)
    d = cutoff_c(1e-4, 2).diagnostics
    assert d["a_over_c"] == pytest.approx(1e-3)
    assert d["c_pow_minus_k_a_pow_k_minus_1"] == pytest.approx(1e-2)


def test_cutoff_requires_k_above_one():
    with pytest.raises(ValueError, match="K>1"):
        cutoff_c(0.1, 1.0)
    with pytest.raises(ValueError):
        cutoff_c(1.5, 2.0)
    with pytest.raises(ValueError):
        Cutoff(0.3, 2.0).diagnostics


def test_single_angle():
    assert log_deriv(AngleSample(Family.UNITARY, 1, [0.0]), EvalPoint(0.1, 1)) == pytest.approx(-10.0)


def test_paired_at_pi():
    v = log_deriv_angles([math.pi], Family.SO_EVEN, 0.9)
    assert v == pytest.approx(3.8 / 3.61, rel=1e-12)
    assert isinstance(v, float)


def test_so_odd_fixed_term_alone():
    # a stored angle at pi contributes 2(z+1)/(z+1)^2 = 2/(z+1); the rest is -N/a
    n, a = 1, 0.1
    z = 1 - a / n
    v = log_deriv(AngleSample(Family.SO_ODD, 1, [math.pi]), EvalPoint(a, n))
    assert v == pytest.approx(-n / a + 2 / (z + 1), rel=1e-12)


@given(angles_u, st.floats(1e-3, 0.9))
def test_unitary_matches_direct_sum(theta, b):
    z = 1 - b
    direct = np.sum(1.0 / (z - np.exp(1j * np.array(theta))))
    got = log_deriv_angles(theta, Family.UNITARY, z)
    assert abs(got - direct) <= 1e-9 * max(1.0, np.sum(np.abs(1.0 / (z - np.exp(1j * np.array(theta))))))


@given(angles_p, st.floats(1e-3, 0.9))
def test_pair_formula_matches_conjugate_sum(theta, b):
    z = 1 - b
    t = np.array(theta)
    both = np.concatenate([np.exp(1j * t), np.exp(-1j * t)])
    direct = np.sum(1.0 / (z - both))
    got = log_deriv_angles(theta, Family.USP, z)
    assert abs(got - direct.real) <= 1e-9 * np.sum(np.abs(1.0 / (z - both)))
    assert abs(direct.imag) <= 1e-9 * np.sum(np.abs(1.0 / (z - both)))


@given(angles_u, st.floats(1e-3, 0.5))
def test_summands_bounded(theta, b):
    n = len(theta)
    a = b * n
    v = log_deriv_many(theta, Family.UNITARY, n, [a])[0]
    assert abs(v) <= n * (n / a) + 1e-9


def test_many_matches_single():
    t = sample(EnsembleSpec(Family.SO_ODD, 12), RngStream(3)).angles
    vals = log_deriv_many(t, Family.SO_ODD, 12, [0.5, 0.1])
    for a, v in zip([0.5, 0.1], vals):
        assert v == pytest.approx(log_deriv_angles(t, Family.SO_ODD, 1 - a / 12), rel=1e-14)


def test_decompose_empty_window():
    d = decompose_angles([1.0, -2.0], Family.UNITARY, 2, 0.1, 0.5)
    assert d.m_term == 0 and d.x3 == 0 and d.window_count == 0
    assert abs(d.full - (d.x1 + d.x2)) <= 1e-12 * abs(d.full)


def test_decompose_one_angle_at_zero():
    d = decompose(AngleSample(Family.UNITARY, 10, [0.0] + [3.0] * 9), EvalPoint(0.1, 10), Cutoff(0.5, 2.0))
    single = decompose_angles([0.0], Family.UNITARY, 10, 0.1, 0.5)
    assert single.m_term == pytest.approx(-100.0)
    assert single.x1 == pytest.approx(-10.0)
    assert single.x2 == 0
    assert single.x3 == pytest.approx(-10.0)
    assert abs(single.e_term) < 1e-12
    assert single.full == pytest.approx(-100.0)
    assert d.window_count == 1


@pytest.mark.parametrize("family", list(Family))
def test_decomposition_identity_on_draws(family):
    n, a = 32, 0.05
    c = cutoff_c(a, 2.0).c
    for i in range(50):
        s = sample(EnsembleSpec(family, n), RngStream.for_sample(17, i))
        d = decompose(s, EvalPoint(a, n), c)
        assert abs(d.full - (d.m_term + d.e_term)) <= 1e-9 * abs(d.full)
        assert abs(d.e_term - (d.x1 + d.x2 - d.x3)) <= 1e-9 * max(abs(d.full), abs(d.e_term))
        assert d.window_count == window_count(s.angles, n, c)


def test_so_odd_fixed_eigenvalue_in_main_term():
    d = decompose_angles([2.0], Family.SO_ODD, 1, 0.1, 0.5)
    assert d.window_count == 0
    assert d.m_term == pytest.approx(-10.0)
    assert d.x3 == pytest.approx(-1.0)
    assert d.x3 == pytest.approx(d.x1 + d.x2 - (d.full - d.m_term))


def test_mismatched_n():
    with pytest.raises(ValueError):
        log_deriv(AngleSample(Family.UNITARY, 2, [0.1, 0.2]), EvalPoint(0.1, 3))


@pytest.mark.parametrize("family", list(Family))
def test_batch_matches_per_sample(family):
    rng = np.random.default_rng(3)
    lo = -np.pi if family is Family.UNITARY else 0.0
    ang = rng.uniform(lo, np.pi, size=(20, 5))
    batch = log_deriv_batch(ang, family, 5, [0.5, 0.01])
    assert batch.shape == (20, 2)
    for row, th in zip(batch, ang):
        np.testing.assert_allclose(row, log_deriv_many(th, family, 5, [0.5, 0.01]), rtol=1e-12)
    with pytest.raises(ValueError):
        log_deriv_batch(ang[0], family, 5, [0.5])
