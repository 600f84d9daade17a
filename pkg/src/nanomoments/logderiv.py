"""P'/P at z = 1 - a/N and its split into a near-window main term and an error.

With ``z0 = 1 - 1/N`` and window ``|theta_j| < c/N``::

    P'/P(z) = M + E,     E = X1 + X2 - X3
    M  = sum_{in}  1/(z - z_j)
    X1 = sum_{all} 1/(z0 - z_j)               (= P'/P(z0))
    X2 = sum_{out} 1/(z - z_j) - 1/(z0 - z_j)
    X3 = sum_{in}  1/(z0 - z_j)

For the paired families each stored angle stands for a conjugate pair, whose
two terms combine to ``2 Re 1/(z - z_j)``; SO(2N+1) adds the fixed eigenvalue
1, which always lies in the window.
"""

import math
from dataclasses import dataclass

import numpy as np

from .ensembles import Family


@dataclass(frozen=True)
class EvalPoint:
    a: float
    n: int

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not self.a / self.n < 1:
            raise ValueError("need a/N < 1 so that |z| < 1")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "n", int(self.n))

    @property
    def z(self):
        return 1.0 - self.a / self.n

    @property
    def z0(self):
        return 1.0 - 1.0 / self.n


@dataclass(frozen=True)
class Cutoff:
    """Window half-width ``c`` (in units of 1/N) for moment order ``k``.

    ``a`` is recorded when the cutoff was derived from an evaluation offset, so
    the three smallness conditions can be reported.
    """

    c: float
    k: float
    a: float | None = None

    @property
    def diagnostics(self):
        """``c``, ``a/c`` and ``c^-K a^(K-1)``; each should be small."""
        if self.a is None:
            raise ValueError("diagnostics need the offset a")
        c, k, a = self.c, self.k, self.a
        return {"c": c, "a_over_c": a / c, "c_pow_minus_k_a_pow_k_minus_1": c ** (-k) * a ** (k - 1.0)}


def cutoff_c(a, k):
    """Default window ``c = a^((K-1)/(2K))``; it meets c -> 0, a = o(c), c^-K = o(a^(1-K))."""
    if not k > 1:
        raise ValueError(f"the cutoff needs K>1, got K={k}")
    if not 0 < a < 1:
        raise ValueError(f"the cutoff needs 0 < a < 1, got a={a}")
    return Cutoff(a ** ((k - 1.0) / (2.0 * k)), float(k), float(a))


@dataclass(frozen=True)
class Decomposition:
    full: complex
    m_term: complex
    x1: complex
    x2: complex
    x3: complex
    e_term: complex
    window_count: int
    c: float


def _csum(values):
    """Compensated complex sum, accumulated in ascending-|value| order of the caller's array."""
    values = np.asarray(values)
    if np.iscomplexobj(values):
        return complex(math.fsum(values.real), math.fsum(values.imag))
    return complex(math.fsum(values), 0.0)


def _per_eigen_terms(theta, z):
    """1/(z - e^{i theta}) with the real part formed without cancellation near theta = 0."""
    s2 = np.sin(0.5 * theta) ** 2
    w = 1.0 - z
    re = 2.0 * s2 - w                    # z - cos(theta)
    im = -np.sin(theta)
    den = w * w + 4.0 * z * s2           # |z - e^{i theta}|^2
    return (re - 1j * im) / den


def _pair_terms(theta, z):
    """2 Re 1/(z - e^{i theta}) for a conjugate pair."""
    s2 = np.sin(0.5 * theta) ** 2
    w = 1.0 - z
    return 2.0 * (2.0 * s2 - w) / (w * w + 4.0 * z * s2)


def terms(theta, family, z):
    """Summands of P'/P(z) for the stored angles (fixed eigenvalue excluded)."""
    family = Family.parse(family)
    theta = np.asarray(theta, dtype=np.float64)
    if family.paired:
        return _pair_terms(theta, z)
    return _per_eigen_terms(theta, z)


def fixed_term(family, z):
    """Contribution 1/(z - 1) of the eigenvalue pinned at 1 (SO(2N+1) only)."""
    return 1.0 / (z - 1.0) if Family.parse(family) is Family.SO_ODD else 0.0


def log_deriv_angles(theta, family, z):
    theta = np.asarray(theta, dtype=np.float64)
    order = np.argsort(np.abs(theta), kind="stable")
    t = terms(theta[order], family, z)
    total = _csum(t) + fixed_term(family, z)
    return total.real if Family.parse(family).paired else total


def log_deriv(sample, p):
    """P'/P(z) at ``z = 1 - a/N``; real for the paired families."""
    if sample.n != p.n:
        raise ValueError(f"sample has N={sample.n} but evaluation point has N={p.n}")
    return log_deriv_angles(sample.angles, sample.family, p.z)


def log_deriv_many(theta, family, n, a_values):
    """P'/P(1 - a/N) for each ``a`` in ``a_values`` (one sample, vectorised over a)."""
    family = Family.parse(family)
    theta = np.asarray(theta, dtype=np.float64)
    theta = theta[np.argsort(np.abs(theta), kind="stable")]
    z = 1.0 - np.asarray(a_values, dtype=np.float64)[:, None] / n
    g = terms(theta[None, :], family, z)
    fz = fixed_term(family, z[:, 0]) if family is Family.SO_ODD else 0.0
    re = np.array([math.fsum(row) for row in g.real]) + fz
    if family.paired:
        return re
    return re + 1j * np.array([math.fsum(row) for row in g.imag])



def log_deriv_batch(angles, family, n, a_values):
    """P'/P(1 - a/N) for a (draws, n) array of angles, shape (draws, len(a_values)).

    Plain floating-point sums stand in for the exactly rounded ones of
    :func:`log_deriv_many`, so results agree with it to a few ulps per term.
    """
    family = Family.parse(family)
    angles = np.asarray(angles, dtype=np.float64)
    if angles.ndim != 2 or angles.shape[1] != n:
        raise ValueError(f"angles must have shape (draws, {n})")
    z = 1.0 - np.asarray(a_values, dtype=np.float64) / n
    g = terms(angles[:, None, :], family, z[None, :, None])
    return g.sum(axis=2) + fixed_term(family, z)

def decompose_angles(theta, family, n, a, c):
    """Decomposition of P'/P(1 - a/n) for window half-width ``c`` (in units of 1/n)."""
    family = Family.parse(family)
    p = EvalPoint(a, n)
    theta = np.asarray(theta, dtype=np.float64)
    theta = theta[np.argsort(np.abs(theta), kind="stable")]
    inside = np.abs(theta) < c / n
    g = terms(theta, family, p.z)
    g0 = terms(theta, family, p.z0)
    fz, fz0 = fixed_term(family, p.z), fixed_term(family, p.z0)
    full = _csum(g) + fz
    m_term = _csum(g[inside]) + fz
    x1 = _csum(g0) + fz0
    x2 = _csum(g[~inside] - g0[~inside])
    x3 = _csum(g0[inside]) + fz0
    e_term = x1 + x2 - x3
    return Decomposition(full, m_term, x1, x2, x3, e_term, int(inside.sum()), float(c))


def decompose(sample, p, cutoff):
    if sample.n != p.n:
        raise ValueError(f"sample has N={sample.n} but evaluation point has N={p.n}")
    c = cutoff.c if isinstance(cutoff, Cutoff) else float(cutoff)
    return decompose_angles(sample.angles, sample.family, p.n, p.a, c)


def window_count(theta, n, c):
    """Number of stored angles with |theta| < c/n."""
    return int(np.count_nonzero(np.abs(np.asarray(theta)) < c / n))
