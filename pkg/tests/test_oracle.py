import math

import pytest

from nanomoments.ensembles import Family
from nanomoments.logderiv import terms
from nanomoments.numkernel.quadrature import integrate
from nanomoments.oracle import (second_moment_exact_unitary, second_moment_fourier_unitary, weyl_moment,
                                weyl_normalization)


def test_unitary_n1_closed_form():
    r = weyl_moment(Family.UNITARY, 1, 0.3, 2.0)
    assert r.value == pytest.approx(1 / (2 * 0.3 - 0.3**2), rel=1e-6)
    assert r.est_quadrature_error < 1e-6


@pytest.mark.parametrize("family,n,expected", [
    (Family.UNITARY, 1, 2 * math.pi),
    (Family.UNITARY, 2, (2 * math.pi) ** 2 * 2),
    (Family.UNITARY, 3, (2 * math.pi) ** 3 * 6),
    (Family.SO_EVEN, 1, math.pi),
    (Family.USP, 1, math.pi / 2),
    (Family.SO_ODD, 1, math.pi / 2),
])
def test_weyl_normalization(family, n, expected):
    assert weyl_normalization(family, n) == pytest.approx(expected, rel=1e-10)


def test_so_even_n1_against_adaptive_rule():
    # SO(2) has a single angle, uniform on (0, pi)
    z = 1 - 0.2
    ref = integrate(lambda t: terms(t, Family.SO_EVEN, z) ** 2 / math.pi, 0.0, math.pi, rel_tol=1e-13,
                    points=(0.01, 0.1, 0.5)).value
    assert weyl_moment(Family.SO_EVEN, 1, 0.2, 2.0).value == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("n", [1, 2, 5, 20, 64])
@pytest.mark.parametrize("a", [0.5, 0.05])
def test_second_moment_two_independent_oracles(n, a):
    assert second_moment_exact_unitary(n, a).value == pytest.approx(second_moment_fourier_unitary(n, a), rel=1e-5)


def test_second_moment_n1_equals_weyl():
    assert second_moment_exact_unitary(1, 0.3).value == pytest.approx(weyl_moment(Family.UNITARY, 1, 0.3, 2).value,
                                                                      rel=1e-8)


def test_second_moment_rotation_invariance():
    base = second_moment_exact_unitary(12, 0.2).value
    assert second_moment_exact_unitary(12, 0.2, rotation=0.731).value == pytest.approx(base, rel=1e-6)


def test_second_moment_weyl_n2():
    assert weyl_moment(Family.UNITARY, 2, 0.3, 2).value == pytest.approx(second_moment_exact_unitary(2, 0.3).value,
                                                                         rel=1e-6)


def test_second_moment_tends_to_leading_term():
    n = 20
    assert 0.8 <= second_moment_exact_unitary(n, 0.05).value / (n * n / 0.1) <= 1.2


def test_weyl_range():
    with pytest.raises(ValueError):
        weyl_moment(Family.UNITARY, 4, 0.3, 2.0)
    with pytest.raises(ValueError):
        second_moment_exact_unitary(65, 0.3)
