"""Eigenangle samplers for Haar-random U(N), SO(2N), SO(2N+1) and USp(2N).

Two constructions are available:

* dense: a Ginibre matrix is orthonormalised by Householder QR with phase
  correction, then its eigenangles are read off Hermitian/symmetric parts;
* tridiag: the cosines ``x = cos(theta)`` of the upper-half-plane angles of the
  orthogonal and symplectic groups form a Jacobi ensemble at beta = 2,
  sampled through its tridiagonal (Killip-Nenciu) matrix model.

Unitary samples store all ``N`` angles in ``(-pi, pi]``.  The paired families
store one representative per conjugate pair, in ``(0, pi)``; the fixed
eigenvalue 1 of SO(2N+1) is implicit.
"""

import enum
import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .numkernel import RealSymTridiag, eig_hermitian, eig_sym_tridiag, householder_qr, phase_normalize


class SamplerIntegrityError(RuntimeError):
    """A sampled spectrum failed a structural consistency check."""


class Family(enum.Enum):
    UNITARY = "u"
    SO_EVEN = "so-even"
    SO_ODD = "so-odd"
    USP = "usp"

    @property
    def paired(self):
        return self is not Family.UNITARY

    @property
    def matrix_size_factor(self):
        return 1 if self is Family.UNITARY else 2

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {
            "u": cls.UNITARY, "unitary": cls.UNITARY, "cue": cls.UNITARY,
            "so-even": cls.SO_EVEN, "soeven": cls.SO_EVEN, "so2n": cls.SO_EVEN,
            "so-odd": cls.SO_ODD, "soodd": cls.SO_ODD, "so2n+1": cls.SO_ODD,
            "usp": cls.USP, "sp": cls.USP, "usp2n": cls.USP,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown ensemble {value!r}; expected one of u, so-even, so-odd, usp") from None


# weights (exp_minus, exp_plus) on (1 - x), (1 + x) for x = cos(theta)
JACOBI_EXPONENTS = {
    Family.SO_EVEN: (-0.5, -0.5),
    Family.SO_ODD: (0.5, -0.5),
    Family.USP: (0.5, 0.5),
}

BACKENDS = ("dense", "tridiag")


@dataclass(frozen=True)
class EnsembleSpec:
    family: Family
    n: int

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def matrix_size(self):
        if self.family is Family.SO_ODD:
            return 2 * self.n + 1
        return self.family.matrix_size_factor * self.n


@dataclass(frozen=True)
class AngleSample:
    """One draw of sorted eigenangles."""

    family: Family
    n: int
    angles: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        angles = np.asarray(self.angles, dtype=np.float64)
        if angles.shape != (self.n,):
            raise ValueError(f"expected {self.n} angles, got shape {angles.shape}")
        object.__setattr__(self, "angles", angles)

    @property
    def eigenvalues(self):
        """The stored eigenvalues ``exp(i theta_j)``."""
        return np.exp(1j * self.angles)


_clamped = 0


def clamp_count():
    """How many cosines have been clamped away from +-1 so far in this process."""
    return _clamped


def _angles_from_cosines(x):
    """arccos of cosines in (-1, 1), ascending in angle."""
    global _clamped
    bad = np.abs(x) >= 1.0
    if np.any(bad):
        _clamped += int(bad.sum())
        warnings.warn("cosine on the boundary of (-1, 1) clamped inward", RuntimeWarning, stacklevel=3)
        x = np.clip(x, -1.0 + 2.0 ** -52, 1.0 - 2.0 ** -52)
    return np.sort(np.arccos(x))


# ---------------------------------------------------------------------------
# dense backends


def haar_unitary(n, stream):
    """Haar-distributed U(n) matrix from a complex Ginibre draw."""
    g = stream.complex_gaussian((n, n))
    q, r = householder_qr(g)
    return phase_normalize(q, r)


def haar_orthogonal(n, stream, special=True):
    """Haar-distributed O(n) (or SO(n) if ``special``) matrix from a real Ginibre draw."""
    g = stream.gaussian((n, n))
    q, r = householder_qr(g)
    o = phase_normalize(q, r).real
    if special and np.linalg.det(o) < 0.0:
        o[:, -1] = -o[:, -1]
    return o


def unitary_angles(u, cluster_tol=1e-8):
    """Eigenangles of a unitary matrix via its Hermitian and anti-Hermitian parts.

    The cosines are the eigenvalues of ``(U + U^H)/2``; each sine is the
    Rayleigh quotient of ``(U - U^H)/(2i)`` at the matching eigenvector.  Where
    cosines nearly coincide (angles close to ``theta`` and ``-theta``), the
    eigenvectors are arbitrary within the cluster, so the sine matrix is
    diagonalised on that subspace instead.
    """
    uh = u.conj().T
    h = 0.5 * (u + uh)
    s_mat = -0.5j * (u - uh)
    c, v = eig_hermitian(h, check=False)
    av = s_mat @ v
    s = np.einsum("ij,ij->j", v.conj(), av).real
    n = c.size
    j = 0
    while j < n:
        k = j + 1
        while k < n and c[k] - c[k - 1] < cluster_tol:
            k += 1
        if k - j > 1:
            vg = v[:, j:k]
            sg, y = eig_hermitian(vg.conj().T @ s_mat @ vg)
            hg = vg.conj().T @ h @ vg
            s[j:k] = sg
            c[j:k] = np.einsum("ij,ij->j", y.conj(), hg @ y).real
        j = k
    theta = np.arctan2(s, c)
    theta[theta <= -math.pi] = math.pi
    return np.sort(theta)


def sample_unitary(n, stream):
    """CUE eigenangles in (-pi, pi]."""
    return AngleSample(Family.UNITARY, n, unitary_angles(haar_unitary(n, stream)))


def so_even_angles(o, pair_tol=1e-8):
    """Upper-half-plane eigenangles of an SO(2n) matrix from its symmetric part."""
    sym = 0.5 * (o + o.T)
    w = eig_hermitian(sym, vectors=False, check=False)
    gap = np.abs(w[0::2] - w[1::2])
    if np.any(gap > pair_tol):
        raise SamplerIntegrityError(f"cosine pairing failed, mismatch {gap.max():.3e}")
    return _angles_from_cosines(0.5 * (w[0::2] + w[1::2]))


def sample_so_even_dense(n, stream):
    """SO(2n) eigenangles from a dense Haar orthogonal matrix."""
    return AngleSample(Family.SO_EVEN, n, so_even_angles(haar_orthogonal(2 * n, stream)))


# ---------------------------------------------------------------------------
# tridiagonal Jacobi backend


@functools.lru_cache(maxsize=64)
def _jacobi_beta_params(n, exp_minus, exp_plus):
    if not (exp_minus > -1.0 and exp_plus > -1.0):
        raise ValueError("Jacobi exponents must exceed -1")
    k = np.arange(2 * n - 1)
    even = k % 2 == 0
    s = np.where(even, (2 * n - k - 2) / 2.0 + exp_minus + 1.0, (2 * n - k - 3) / 2.0 + exp_minus + exp_plus + 2.0)
    t = np.where(even, (2 * n - k - 2) / 2.0 + exp_plus + 1.0, (2 * n - k - 1) / 2.0)
    s.flags.writeable = False
    t.flags.writeable = False
    return s, t


@njit(cache=True)
def _jacobi_entries(alpha):
    # alpha_{-2} = 0 and alpha_{-1} = alpha_{2n-1} = -1
    n = (alpha.size + 1) // 2
    ext = np.empty(2 * n + 2)
    ext[0] = 0.0
    ext[1] = -1.0
    ext[2:2 * n + 1] = alpha
    ext[2 * n + 1] = -1.0
    diag = np.empty(n)
    off = np.empty(max(n - 1, 0))
    for k in range(n):
        a_back, a_prev, a_curr = ext[2 * k], ext[2 * k + 1], ext[2 * k + 2]
        diag[k] = (1.0 - a_prev) * a_curr - (1.0 + a_prev) * a_back
    for k in range(n - 1):
        v = (1.0 - ext[2 * k + 1]) * (1.0 - ext[2 * k + 2] ** 2) * (1.0 + ext[2 * k + 3])
        off[k] = math.sqrt(max(v, 0.0))
    return diag, off


def jacobi_tridiagonal(n, exp_minus, exp_plus, stream):
    """Random Jacobi matrix whose spectrum is the beta = 2 Jacobi ensemble on (-1, 1).

    Verblunsky-type coefficients ``alpha_k`` are independent Beta variables
    on (-1, 1); the matrix built from them has eigenvalues with joint density
    proportional to ``prod |x_j - x_k|^2 prod (1 - x)^exp_minus (1 + x)^exp_plus``.
    """
    s, t = _jacobi_beta_params(n, float(exp_minus), float(exp_plus))
    # density on (-1, 1) proportional to (1 - x)^(s-1) (1 + x)^(t-1)
    alpha = 1.0 - 2.0 * stream.beta(s, t)
    diag, off = _jacobi_entries(alpha)
    return RealSymTridiag(0.5 * diag, 0.5 * off)


def sample_jacobi_beta2(n, exp_minus, exp_plus, stream):
    """Sorted points of the beta = 2 Jacobi ensemble on (-1, 1)."""
    return eig_sym_tridiag(jacobi_tridiagonal(n, exp_minus, exp_plus, stream))


def _sample_paired_tridiag(family, n, stream):
    em, ep = JACOBI_EXPONENTS[family]
    x = sample_jacobi_beta2(n, em, ep, stream)
    return AngleSample(family, n, _angles_from_cosines(x))


def sample_so_even(n, stream, backend="tridiag"):
    if backend == "dense":
        return sample_so_even_dense(n, stream)
    if backend != "tridiag":
        raise ValueError(f"unknown backend {backend!r}")
    return _sample_paired_tridiag(Family.SO_EVEN, n, stream)


def sample_so_odd(n, stream):
    return _sample_paired_tridiag(Family.SO_ODD, n, stream)


def sample_usp(n, stream):
    return _sample_paired_tridiag(Family.USP, n, stream)


def default_backend(family):
    return "dense" if Family.parse(family) is Family.UNITARY else "tridiag"


def check_backend(family, backend):
    """Validate a (family, backend) pair and return the resolved backend name."""
    family = Family.parse(family)
    if backend is None:
        return default_backend(family)
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; expected dense or tridiag")
    if family is Family.UNITARY and backend != "dense":
        raise ValueError("the unitary ensemble has only the dense backend")
    if family in (Family.SO_ODD, Family.USP) and backend != "tridiag":
        raise ValueError(f"no dense backend for {family.value}; use tridiag")
    return backend


def sample(spec, stream, backend=None):
    """Draw one :class:`AngleSample` for ``spec``."""
    backend = check_backend(spec.family, backend)
    fam = spec.family
    if fam is Family.UNITARY:
        return sample_unitary(spec.n, stream)
    if fam is Family.SO_EVEN:
        return sample_so_even(spec.n, stream, backend)
    if fam is Family.SO_ODD:
        return sample_so_odd(spec.n, stream)
    return sample_usp(spec.n, stream)
