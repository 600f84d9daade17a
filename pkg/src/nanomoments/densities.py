"""Level densities and window statistics.

Exact finite-N one-level densities come from the determinantal kernels of the
four families (angles per unit angle, on the fundamental range):

* U(N):       N / 2pi
* SO(2N):     (2N - 1 + D_{2N-1}(theta)) / 2pi
* SO(2N+1):   (2N - D_{2N}(theta)) / 2pi
* USp(2N):    (2N + 1 - D_{2N+1}(theta)) / 2pi

with ``D_m(theta) = sin(m theta) / sin(theta)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .ensembles import Family
from .numkernel.quadrature import integrate

_SMALL = 1e-6


def sine_kernel(n, x):
    """S_N(x) = sin(Nx/2) / sin(x/2), equal to +-N at multiples of 2pi."""
    x = np.asarray(x, dtype=np.float64)
    den = np.sin(0.5 * x)
    small = np.abs(den) < _SMALL
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sin(0.5 * n * x) / den
    if np.any(small):
        k = np.round(x[small] / (2.0 * np.pi))
        y = x[small] - 2.0 * np.pi * k
        sign = np.where(((n - 1) * k.astype(np.int64)) % 2 == 0, 1.0, -1.0)
        out = np.array(out, copy=True)
        out[small] = sign * n * (1.0 - (n * n - 1.0) * y * y / 24.0)
    return out if out.ndim else float(out)


def _dirichlet_ratio(m, theta):
    """sin(m theta) / sin(theta) with the removable singularities at 0 and pi."""
    theta = np.asarray(theta, dtype=np.float64)
    den = np.sin(theta)
    small = np.abs(den) < _SMALL
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sin(m * theta) / den
    if np.any(small):
        t = theta[small]
        k = np.round(t / np.pi)
        y = t - np.pi * k
        sign = np.where(((m + 1) * k.astype(np.int64)) % 2 == 0, 1.0, -1.0)
        out = np.array(out, copy=True)
        out[small] = sign * m * (1.0 - (m * m - 1.0) * y * y / 6.0)
    return out


def fundamental_range(family):
    return (-math.pi, math.pi) if Family.parse(family) is Family.UNITARY else (0.0, math.pi)


def one_level_density(family, n, theta):
    """Exact expected number of stored angles per unit angle at ``theta``."""
    family = Family.parse(family)
    theta = np.asarray(theta, dtype=np.float64)
    if family is Family.UNITARY:
        out = np.full(theta.shape, n / (2.0 * math.pi))
    elif family is Family.SO_EVEN:
        out = (2 * n - 1 + _dirichlet_ratio(2 * n - 1, theta)) / (2.0 * math.pi)
    elif family is Family.SO_ODD:
        out = (2 * n - _dirichlet_ratio(2 * n, theta)) / (2.0 * math.pi)
    else:
        out = (2 * n + 1 - _dirichlet_ratio(2 * n + 1, theta)) / (2.0 * math.pi)
    return out if out.ndim else float(out)


def near_zero_density(family, n, theta):
    """Large-N behaviour of the one-level density for theta of order 1/N."""
    family = Family.parse(family)
    theta = np.asarray(theta, dtype=np.float64)
    if family is Family.UNITARY:
        return np.full(theta.shape, n / (2.0 * math.pi))
    if family is Family.SO_EVEN:
        return np.full(theta.shape, 2.0 * n / math.pi)
    return 2.0 * n ** 3 * theta ** 2 / (3.0 * math.pi)


def m_level_density_unitary(n, thetas):
    """Ordered-tuple correlation density det[S_N(theta_k - theta_j)] / (2pi)^m."""
    th = np.asarray(thetas, dtype=np.float64).ravel()
    m = th.size
    if m < 1 or m > 8:
        raise ValueError("m-level density implemented for 1 <= m <= 8")
    kernel = sine_kernel(n, th[:, None] - th[None, :])
    return float(np.linalg.det(np.atleast_2d(kernel))) / (2.0 * math.pi) ** m


def cluster_prob_bound(n, c, m, family=Family.UNITARY, theta=None):
    """Bound, per unit d(theta), on P(exactly m angles in the window and one at theta).

    Unitary: (N/2pi) m (c/pi)^(m-1).  USp: N^3 theta^2 m (c^3)^(m-1), which
    needs ``theta``.
    """
    if m < 1 or not c > 0:
        raise ValueError("need m >= 1 and c > 0")
    family = Family.parse(family)
    if family is Family.USP:
        if theta is None:
            raise ValueError("the symplectic bound depends on theta")
        return n ** 3 * theta ** 2 * m * c ** (3 * (m - 1))
    return n / (2.0 * math.pi) * m * (c / math.pi) ** (m - 1)


def integrated_cluster_bound(n, c, m, family=Family.UNITARY):
    """The per-d(theta) bound integrated across the window [-c/N, c/N].

    This bounds E[#angles in the window ; exactly m in the window], i.e.
    ``m * P(exactly m)``.
    """
    family = Family.parse(family)
    if family is Family.USP:
        return m * c ** (3 * (m - 1)) * c ** 3 / 3.0
    return (2.0 * c / n) * cluster_prob_bound(n, c, m)


@dataclass
class DensityCurve:
    family: Family
    n: int
    grid: np.ndarray
    values: np.ndarray
    edges: np.ndarray = field(repr=False)
    stderr: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    draws: int = 0

    @property
    def total_mass(self):
        return float(np.sum(self.values * np.diff(self.edges)))


def empirical_density(samples, bins=100, lo=None, hi=None):
    """Histogram density per unit angle with binomial standard errors."""
    samples = list(samples)
    if not samples:
        raise ValueError("empirical_density needs at least one sample")
    family, n = samples[0].family, samples[0].n
    if any(s.family is not family or s.n != n for s in samples):
        raise ValueError("all samples must share family and n")
    return density_from_angles(family, n, np.stack([s.angles for s in samples]), bins, lo, hi)


def density_from_angles(family, n, angles, bins=100, lo=None, hi=None):
    """As :func:`empirical_density`, for a (draws, n) array of stored angles."""
    family = Family.parse(family)
    angles = np.asarray(angles, dtype=np.float64)
    if angles.ndim != 2 or angles.shape[1] != n:
        raise ValueError(f"angles must have shape (draws, {n})")
    flo, fhi = fundamental_range(family)
    lo = flo if lo is None else lo
    hi = fhi if hi is None else hi
    edges = np.linspace(lo, hi, bins + 1) if np.isscalar(bins) else np.asarray(bins, dtype=float)
    counts, _ = np.histogram(angles.ravel(), bins=edges)
    draws = angles.shape[0]
    total = draws * n
    width = np.diff(edges)
    p = counts / total
    values = counts / (draws * width)
    stderr = np.sqrt(total * p * (1.0 - p)) / (draws * width)
    return DensityCurve(family, n, 0.5 * (edges[1:] + edges[:-1]), values, edges, stderr, counts, draws)


def expected_bin_counts(family, n, edges, draws):
    """Exact expected histogram counts for ``draws`` samples."""
    out = np.empty(len(edges) - 1)
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        out[i] = integrate(lambda t: one_level_density(family, n, t), a, b, rel_tol=1e-12).value
    return out * draws


def compare_to_exact(curve, density=None):
    """Binomial z-scores of each histogram bin against an exact density.

    ``density`` defaults to the exact finite-N one-level density of the
    curve's family; any callable ``f(theta)`` may be given instead.
    """
    if density is None:
        expected = expected_bin_counts(curve.family, curve.n, curve.edges, curve.draws)
    else:
        expected = np.array([
            integrate(density, a, b, rel_tol=1e-12).value for a, b in zip(curve.edges[:-1], curve.edges[1:])
        ]) * curve.draws
    total = curve.draws * curve.n
    p = expected / total
    sd = np.sqrt(total * p * (1.0 - p))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, (curve.counts - expected) / sd, np.where(curve.counts == expected, 0.0, np.inf))
    return z


def sum_rule(family, n, rel_tol=1e-11):
    """Integral of the one-level density over the fundamental range (should equal n)."""
    lo, hi = fundamental_range(family)
    panels = max(4, 2 * n)
    return integrate(lambda t: one_level_density(family, n, t), lo, hi, rel_tol=rel_tol, init_panels=panels).value


@dataclass
class WindowStats:
    """How many stored angles fell inside ``|theta| < c/N``, over many samples."""

    c: float
    n: int
    draws: int
    frequencies: dict
    counts: np.ndarray = field(repr=False)

    @property
    def p_exactly_one_given_any(self):
        occupied = 1.0 - self.frequencies.get(0, 0.0)
        if occupied == 0.0:
            return float("nan")
        return self.frequencies.get(1, 0.0) / occupied

    def clustered_mass(self, m_min=2):
        """Empirical E[count ; count >= m_min] and its standard error."""
        w = np.where(self.counts >= m_min, self.counts, 0).astype(float)
        se = float(w.std(ddof=1) / math.sqrt(self.draws)) if self.draws > 1 else float("nan")
        return float(w.mean()), se


def window_counts(samples, c):
    """Per-sample number of stored angles with |theta| < c/N.

    ``samples`` is a sequence of :class:`AngleSample` or a (draws, N) array.
    """
    if isinstance(samples, np.ndarray):
        if samples.ndim != 2 or samples.shape[0] == 0:
            raise ValueError("need a non-empty (draws, N) array")
        n = samples.shape[1]
        return np.count_nonzero(np.abs(samples) < c / n, axis=1), n
    samples = list(samples)
    if not samples:
        raise ValueError("need at least one sample")
    n = samples[0].n
    return np.array([np.count_nonzero(np.abs(s.angles) < c / n) for s in samples]), n


def window_count_distribution(samples, c):
    """Distribution of the number of angles in the window across samples."""
    counts, n = window_counts(samples, c)
    values, freq = np.unique(counts, return_counts=True)
    draws = counts.size
    return WindowStats(float(c), n, draws, {int(v): f / draws for v, f in zip(values, freq)}, counts)
