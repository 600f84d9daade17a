import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nanomoments.densities import (cluster_prob_bound, compare_to_exact, density_from_angles, empirical_density,
                                   integrated_cluster_bound, m_level_density_unitary, near_zero_density,
                                   one_level_density, sine_kernel, sum_rule, window_count_distribution)
from nanomoments.ensembles import EnsembleSpec, Family, sample
from nanomoments.numkernel import RngStream


def test_sine_kernel_limits():
    assert sine_kernel(7, 0.0) == pytest.approx(7.0)
    assert sine_kernel(8, 2 * math.pi) == pytest.approx(-8.0)
    assert sine_kernel(7, 1e-9) == pytest.approx(7.0)


@given(st.integers(1, 50), st.floats(-6.0, 6.0))
def test_sine_kernel_is_a_cosine_sum(n, x):
    j = np.arange(n) - (n - 1) / 2.0
    assert sine_kernel(n, x) == pytest.approx(np.sum(np.cos(j * x)), abs=1e-9 * n)


@pytest.mark.parametrize("family", list(Family))
@pytest.mark.parametrize("n", [1, 2, 5, 16, 33])
def test_sum_rule(family, n):
    assert sum_rule(family, n) == pytest.approx(n, rel=1e-10)


def test_n1_densities_match_weyl():
    t = np.linspace(0.1, 3.0, 7)
    assert np.allclose(one_level_density(Family.SO_EVEN, 1, t), 1 / math.pi)
    assert np.allclose(one_level_density(Family.USP, 1, t), 2 / math.pi * np.sin(t) ** 2)
    assert np.allclose(one_level_density(Family.SO_ODD, 1, t), (1 - np.cos(t)) / math.pi)


def test_near_zero_limits():
    n = 32
    assert one_level_density(Family.SO_EVEN, n, 1e-7) == pytest.approx((2 * n - 1) / math.pi, rel=1e-9)
    for theta in [1e-3, 2e-3]:
        assert one_level_density(Family.USP, n, theta) / near_zero_density(Family.USP, n, theta) == pytest.approx(
            1.0, abs=0.05)
    assert near_zero_density(Family.SO_EVEN, n, 0.01) == pytest.approx(2 * n / math.pi)


def test_two_level_vanishes_on_diagonal():
    assert m_level_density_unitary(10, [0.3, 0.3]) == pytest.approx(0.0, abs=1e-12)
    assert m_level_density_unitary(10, [0.3]) == pytest.approx(10 / (2 * math.pi))
    assert m_level_density_unitary(10, [0.3, 0.5]) == pytest.approx(m_level_density_unitary(10, [0.5, 0.3]))
    with pytest.raises(ValueError):
        m_level_density_unitary(10, np.zeros(9))


def test_cluster_bounds():
    n, c = 64, 0.1
    assert cluster_prob_bound(n, c, 1) == pytest.approx(n / (2 * math.pi))
    assert integrated_cluster_bound(n, c, 2) == pytest.approx(2 * (c / math.pi) ** 2)
    assert cluster_prob_bound(n, c, 2, Family.USP, theta=0.01) == pytest.approx(n**3 * 1e-4 * 2 * c**3)
    with pytest.raises(ValueError):
        cluster_prob_bound(n, c, 2, Family.USP)
    with pytest.raises(ValueError):
        cluster_prob_bound(n, 0.0, 2)


def test_empirical_density_mass_and_comparison():
    draws = [sample(EnsembleSpec(Family.SO_ODD, 8), RngStream.for_sample(4, i)) for i in range(3000)]
    curve = empirical_density(draws, bins=40)
    assert curve.total_mass == pytest.approx(8.0)
    assert np.mean(np.abs(compare_to_exact(curve)) <= 3.0) >= 0.95
    again = density_from_angles(Family.SO_ODD, 8, np.stack([d.angles for d in draws]), bins=40)
    assert np.array_equal(curve.counts, again.counts)


def test_wrong_density_is_rejected():
    draws = [sample(EnsembleSpec(Family.USP, 8), RngStream.for_sample(5, i)) for i in range(3000)]
    curve = empirical_density(draws, bins=40)
    z = compare_to_exact(curve, density=lambda t: one_level_density(Family.SO_EVEN, 8, t))
    assert np.mean(np.abs(z) <= 3.0) < 0.9


def test_mixed_samples_rejected():
    a = sample(EnsembleSpec(Family.USP, 4), RngStream(1))
    b = sample(EnsembleSpec(Family.USP, 5), RngStream(1))
    with pytest.raises(ValueError):
        empirical_density([a, b])


def test_window_stats():
    ang = np.array([[0.001, 0.5, 2.0], [0.001, -0.002, 1.0], [1.0, 2.0, 3.0]])
    ws = window_count_distribution(ang, c=0.03)
    assert ws.frequencies == {0: pytest.approx(1 / 3), 1: pytest.approx(1 / 3), 2: pytest.approx(1 / 3)}
    assert ws.p_exactly_one_given_any == pytest.approx(0.5)
    mass, se = ws.clustered_mass(2)
    assert mass == pytest.approx(2 / 3)
    assert se > 0
