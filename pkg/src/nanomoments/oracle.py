"""Ground-truth moments computed without sampling.

``weyl_moment`` integrates |P'/P|^K against the joint eigenangle density of
the Weyl integration formula on a tensor-product grid (n <= 3).
``second_moment_exact_unitary`` evaluates E|P'/P|^2 for U(N) from the one- and
two-level densities by 1-D and 2-D quadrature.
"""

import math
from dataclasses import dataclass

import numpy as np

from .densities import sine_kernel
from .ensembles import Family
from .logderiv import fixed_term, terms
from .numkernel.quadrature import gauss_legendre_panels, graded_breaks, integrate


@dataclass(frozen=True)
class OracleResult:
    value: float
    est_quadrature_error: float


def _weight_factors(family, theta):
    """Pairwise and single-angle factors of the (unnormalised) joint density."""
    if family is Family.UNITARY:
        pair = lambda x, y: 4.0 * np.sin(0.5 * (x - y)) ** 2
        single = None
    else:
        pair = lambda x, y: (np.cos(x) - np.cos(y)) ** 2
        single = {
            Family.SO_EVEN: None,
            Family.USP: np.sin(theta) ** 2,
            Family.SO_ODD: np.sin(0.5 * theta) ** 2,
        }[family]
    return pair, single


def _grid(family, n, a, order, refine):
    b = a / n
    if family is Family.UNITARY:
        lo, hi = -math.pi, math.pi
    else:
        lo, hi = 0.0, math.pi
    breaks = graded_breaks(lo, hi, 0.0, b / 4.0, ratio=2.0 ** (1.0 / refine), uniform=0.25 / refine)
    return gauss_legendre_panels(breaks, order)


def _weyl_eval(family, n, a, k, order, refine):
    theta, w = _grid(family, n, a, order, refine)
    z = 1.0 - a / n
    g = terms(theta, family, z)
    fz = fixed_term(family, z)
    pair, single = _weight_factors(family, theta)
    wq = w if single is None else w * single
    if n == 1:
        ld = g + fz
        num = np.sum(wq * np.abs(ld) ** k)
        den = np.sum(wq)
    elif n == 2:
        p12 = pair(theta[:, None], theta[None, :])
        ww = wq[:, None] * wq[None, :] * p12
        ld = g[:, None] + g[None, :] + fz
        num = np.sum(ww * np.abs(ld) ** k)
        den = np.sum(ww)
    else:
        p2 = pair(theta[:, None], theta[None, :])
        num = 0.0
        den = 0.0
        # slice over the first angle to bound memory
        for i in range(theta.size):
            ww = wq[i] * p2[i][:, None] * p2[i][None, :] * p2 * (wq[:, None] * wq[None, :])
            ld = g[i] + g[:, None] + g[None, :] + fz
            num += np.sum(ww * np.abs(ld) ** k)
            den += np.sum(ww)
    return num / den, den


def weyl_moment(family, n, a, k, rel_tol=1e-6, max_refine=4):
    """Exact E|P'/P(1 - a/N)|^K for tiny N by brute-force Weyl integration.

    The grid is graded toward theta = 0, where the integrand peaks at width
    a/N.  Accuracy is estimated by comparing against a finer grid, refined
    until two successive estimates agree to ``rel_tol``.
    """
    family = Family.parse(family)
    if n < 1 or n > 3:
        raise ValueError("weyl_moment supports 1 <= n <= 3")
    order = {1: 24, 2: 16, 3: 6}[n]
    prev, _ = _weyl_eval(family, n, a, k, order, 1)
    err = math.inf
    for refine in range(2, max_refine + 1):
        cur, _ = _weyl_eval(family, n, a, k, order, refine)
        err = abs(cur - prev)
        prev = cur
        if err <= rel_tol * abs(cur):
            break
    return OracleResult(float(prev), float(err))


def weyl_normalization(family, n, order=16):
    """Integral of the unnormalised joint density over the fundamental cube."""
    family = Family.parse(family)
    lo, hi = (-math.pi, math.pi) if family is Family.UNITARY else (0.0, math.pi)
    theta, w = gauss_legendre_panels(np.linspace(lo, hi, 9), order)
    pair, single = _weight_factors(family, theta)
    wq = w if single is None else w * single
    if n == 1:
        return float(np.sum(wq))
    p = pair(theta[:, None], theta[None, :])
    if n == 2:
        return float(np.sum(wq[:, None] * wq[None, :] * p))
    tot = 0.0
    for i in range(theta.size):
        tot += np.sum(wq[i] * p[i][:, None] * p[i][None, :] * p * (wq[:, None] * wq[None, :]))
    return float(tot)


def _single_term_unitary(n, z):
    """(N/2pi) * integral of |z - e^{i theta}|^-2 over the circle."""
    def f(t):
        return 1.0 / np.abs(z - np.exp(1j * t)) ** 2

    b = 1.0 - abs(z)
    res = integrate(f, -math.pi, math.pi, rel_tol=1e-12, points=(0.0, -b, b, -10 * b, 10 * b))
    return n / (2.0 * math.pi) * res.value, n / (2.0 * math.pi) * res.error


def _pair_term_unitary(n, a, order, refine, rotation):
    b = a / n
    brk = graded_breaks(-math.pi, math.pi, 0.0, b / 4.0, ratio=2.0 ** (1.0 / refine),
                        uniform=min(0.25, math.pi / max(n, 1)) / refine)
    t, w = gauss_legendre_panels(brk, order)
    t = t + rotation
    z = 1.0 - b
    g = 1.0 / (z * np.exp(1j * rotation) - np.exp(1j * t))
    gw = g * w
    s = sine_kernel(n, t[:, None] - t[None, :])
    rho2 = (n * n - s * s) / (2.0 * math.pi) ** 2
    val = gw @ rho2 @ gw.conj()
    return val


def second_moment_exact_unitary(n, a, rotation=0.0, rel_tol=1e-5, max_refine=6):
    """E|P'/P(1 - a/N)|^2 over U(N), from the one- and two-level densities.

    ``rotation`` evaluates the same moment at ``z e^{i rotation}`` with the
    integration grid rotated along; by rotation invariance of Haar measure
    the answer must not change.
    """
    if n < 1 or n > 64:
        raise ValueError("second_moment_exact_unitary supports 1 <= n <= 64")
    z = 1.0 - a / n
    one, one_err = _single_term_unitary(n, z)
    if n == 1:
        return OracleResult(one, one_err)
    order = 10
    prev = _pair_term_unitary(n, a, order, 1, rotation)
    err = math.inf
    for refine in range(2, max_refine + 1):
        cur = _pair_term_unitary(n, a, order, refine, rotation)
        err = abs(cur - prev)
        prev = cur
        if err <= 0.1 * rel_tol * abs(one + cur.real):
            break
    total = one + prev.real
    return OracleResult(float(total), float(err + one_err + abs(prev.imag)))


def second_moment_fourier_unitary(n, a):
    """Closed form of E|P'/P(z)|^2 for real 0 < z < 1 from Fourier coefficients.

    N/(1 - z^2) - sum_{m=1}^{N-1} (N - m) z^(2m - 2).
    """
    z = 1.0 - a / n
    m = np.arange(1, n)
    return n / (1.0 - z * z) - math.fsum((n - m) * z ** (2 * m - 2))
