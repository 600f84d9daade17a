"""Dense QR and symmetric/Hermitian eigensolvers.

The kernels are compiled with numba and release the GIL.  They follow the
classical recipes: Householder reflectors for QR and for reduction to real
symmetric tridiagonal form, then the implicit-shift QL iteration.
"""

from dataclasses import dataclass

import numba
import numpy as np

MAX_SWEEPS = 50
_EPS = np.finfo(np.float64).eps


class DegenerateInputError(ValueError):
    """QR produced a zero diagonal entry in R."""


class SolverFailure(RuntimeError):
    """The QL iteration did not converge within the sweep cap."""


@dataclass(frozen=True)
class RealSymTridiag:
    """Real symmetric tridiagonal matrix given by its diagonal and off-diagonal."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=np.float64)
        e = np.asarray(self.offdiag, dtype=np.float64)
        if e.shape != (max(d.size - 1, 0),):
            raise ValueError("offdiag must have length len(diag) - 1")
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", e)

    def dense(self):
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


# ---------------------------------------------------------------------------
# compiled kernels


@numba.njit(cache=True, nogil=True)
def _householder_qr(a):
    n = a.shape[0]
    r = a.copy()
    q = np.eye(n, dtype=a.dtype)
    v = np.empty(n, dtype=a.dtype)
    for k in range(n - 1):
        x0 = r[k, k]
        sigma = 0.0
        for i in range(k + 1, n):
            sigma += abs(r[i, k]) ** 2
        if sigma == 0.0:
            continue
        ax0 = abs(x0)
        norm = np.sqrt(ax0 * ax0 + sigma)
        phase = x0 / ax0 if ax0 > 0.0 else 1.0 + 0.0 * x0
        # v0 = x0 - phase*norm without cancellation; alpha = phase*norm stays on the diagonal
        v[k] = -phase * sigma / (ax0 + norm)
        for i in range(k + 1, n):
            v[i] = r[i, k]
        vnorm2 = abs(v[k]) ** 2 + sigma
        beta = 2.0 / vnorm2
        for j in range(k, n):
            s = 0.0 * x0
            for i in range(k, n):
                s += np.conj(v[i]) * r[i, j]
            s *= beta
            for i in range(k, n):
                r[i, j] -= v[i] * s
        for i in range(n):
            s = 0.0 * x0
            for j in range(k, n):
                s += q[i, j] * v[j]
            s *= beta
            for j in range(k, n):
                q[i, j] -= s * np.conj(v[j])
        r[k, k] = phase * norm
        for i in range(k + 1, n):
            r[i, k] = 0.0
    return q, r


@numba.njit(cache=True, nogil=True)
def _tridiagonalize(a, want_vectors):
    """Reduce Hermitian ``a`` to real tridiagonal form: a = Z T Z^H."""
    n = a.shape[0]
    h = a.copy()
    z = np.eye(n, dtype=np.complex128)
    v = np.zeros(n, dtype=np.complex128)
    p = np.zeros(n, dtype=np.complex128)
    for k in range(n - 2):
        m0 = k + 1
        x0 = h[m0, k]
        sigma = 0.0
        for i in range(m0 + 1, n):
            sigma += abs(h[i, k]) ** 2
        if sigma == 0.0:
            continue
        ax0 = abs(x0)
        norm = np.sqrt(ax0 * ax0 + sigma)
        phase = x0 / ax0 if ax0 > 0.0 else 1.0 + 0.0j
        v[m0] = -phase * sigma / (ax0 + norm)
        for i in range(m0 + 1, n):
            v[i] = h[i, k]
        beta = 2.0 / (abs(v[m0]) ** 2 + sigma)
        # p = beta * H v on the trailing block
        vhp = 0.0
        for i in range(m0, n):
            s = 0.0j
            for j in range(m0, n):
                s += h[i, j] * v[j]
            p[i] = beta * s
            vhp += (np.conj(v[i]) * p[i]).real
        kk = 0.5 * beta * vhp
        for i in range(m0, n):
            p[i] -= kk * v[i]
        for i in range(m0, n):
            for j in range(m0, n):
                h[i, j] -= v[i] * np.conj(p[j]) + p[i] * np.conj(v[j])
        h[m0, k] = phase * norm
        h[k, m0] = np.conj(h[m0, k])
        for i in range(m0 + 1, n):
            h[i, k] = 0.0
            h[k, i] = 0.0
        if want_vectors:
            for i in range(n):
                s = 0.0j
                for j in range(m0, n):
                    s += z[i, j] * v[j]
                s *= beta
                for j in range(m0, n):
                    z[i, j] -= s * np.conj(v[j])
    d = np.empty(n)
    e = np.zeros(n)
    for i in range(n):
        d[i] = h[i, i].real
    # diagonal phase change making the off-diagonal real and non-negative
    ph = 1.0 + 0.0j
    for i in range(n - 1):
        s = h[i + 1, i]
        a_s = abs(s)
        e[i] = a_s
        if a_s > 0.0:
            ph = ph * (s / a_s)
        if want_vectors:
            for r in range(n):
                z[r, i + 1] *= ph
    return d, e, z


@numba.njit(cache=True, nogil=True)
def _tql(d, e, z, want_vectors, max_sweeps):
    """Implicit QL on (d, e); e[i] couples i and i+1, e[n-1] ignored.

    Returns 0 on success or the 1-based index of the eigenvalue that failed.
    """
    n = d.shape[0]
    if n == 1:
        return 0
    e[n - 1] = 0.0
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _EPS * dd:
                    break
                m += 1
            if m == l:
                break
            if it == max_sweeps:
                return l + 1
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0.0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            early = False
            i = m - 1
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    early = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if want_vectors:
                    for k in range(z.shape[0]):
                        f2 = z[k, i + 1]
                        z[k, i + 1] = s * z[k, i] + c * f2
                        z[k, i] = c * z[k, i] - s * f2
                i -= 1
            if early:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return 0


# ---------------------------------------------------------------------------
# public wrappers


def householder_qr(m):
    """QR factorisation by Householder reflections.

    Each diagonal entry ``R_kk`` carries the phase of the leading entry of the
    column it was reduced from (so the identity factors as I times I).  Use
    :func:`phase_normalize` to move those phases into ``Q``.
    """
    a = np.asarray(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("householder_qr expects a square matrix")
    dtype = np.complex128 if np.iscomplexobj(a) else np.float64
    return _householder_qr(np.ascontiguousarray(a, dtype=dtype))


def phase_normalize(q, r):
    """Rescale the columns of ``q`` so the matching R would have a positive diagonal.

    Column ``j`` is multiplied by ``R_jj / |R_jj|``.  Applied to the QR of a
    Ginibre matrix this yields a Haar-distributed unitary (orthogonal, for real
    input).
    """
    dg = np.diagonal(np.asarray(r))
    mag = np.abs(dg)
    if np.any(mag == 0.0):
        raise DegenerateInputError("R has a zero diagonal entry; input is rank deficient")
    return np.asarray(q) * (dg / mag)[np.newaxis, :]


def hermitian_tridiagonalize(m):
    """Return ``(diag, offdiag, Z)`` with ``m = Z T Z^H`` and T real tridiagonal."""
    a = np.ascontiguousarray(m, dtype=np.complex128)
    d, e, z = _tridiagonalize(a, True)
    return d, e[:-1].copy() if e.size else e, z


def _check_hermitian(a):
    scale = np.max(np.abs(a)) if a.size else 0.0
    if np.max(np.abs(a - a.conj().T), initial=0.0) > 1e-12 * max(scale, 1.0):
        raise ValueError("matrix is not Hermitian to tolerance")


def eig_hermitian(m, vectors=True, check=True):
    """Eigen-decomposition of a Hermitian (or real symmetric) matrix.

    Returns ascending eigenvalues and, if ``vectors``, the matrix whose columns
    are the orthonormal eigenvectors.  ``check=False`` skips the Hermitian
    test for callers that build the matrix as ``(A + A^H)/2`` themselves.
    """
    a = np.ascontiguousarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("eig_hermitian expects a square matrix")
    if check:
        _check_hermitian(a)
    d, e, z = _tridiagonalize(a, vectors)
    status = _tql(d, e, z, vectors, MAX_SWEEPS)
    if status:
        raise SolverFailure(f"QL iteration did not converge for eigenvalue {status}")
    order = np.argsort(d, kind="stable")
    if not vectors:
        return d[order]
    return d[order], z[:, order]


def eig_sym_tridiag(t):
    """Ascending eigenvalues of a real symmetric tridiagonal matrix."""
    d = np.array(t.diag, dtype=np.float64)
    e = np.zeros(d.size)
    e[: d.size - 1] = t.offdiag
    status = _tql(d, e, np.empty((0, 0)), False, MAX_SWEEPS)
    if status:
        raise SolverFailure(f"QL iteration did not converge for eigenvalue {status}")
    d.sort()
    return d


def sturm_count(diag, offdiag, x):
    """Number of eigenvalues of the tridiagonal (diag, offdiag) below ``x``."""
    count = 0
    q = 1.0
    for i, di in enumerate(diag):
        b2 = offdiag[i - 1] ** 2 if i > 0 else 0.0
        q = di - x - (b2 / q if i > 0 else 0.0)
        if q == 0.0:
            q = -_EPS * (abs(di) + abs(x) + 1.0)
        if q < 0.0:
            count += 1
    return count


def bisect_eigenvalues(diag, offdiag, tol=1e-14):
    """All eigenvalues of a symmetric tridiagonal matrix by Sturm-sequence bisection."""
    diag = np.asarray(diag, dtype=float)
    offdiag = np.asarray(offdiag, dtype=float)
    n = diag.size
    radius = np.abs(np.concatenate([[0.0], offdiag])) + np.abs(np.concatenate([offdiag, [0.0]]))
    lo0 = float(np.min(diag - radius)) - 1.0
    hi0 = float(np.max(diag + radius)) + 1.0
    out = np.empty(n)
    for k in range(n):
        lo, hi = lo0, hi0
        while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
            mid = 0.5 * (lo + hi)
            if sturm_count(diag, offdiag, mid) > k:
                hi = mid
            else:
                lo = mid
        out[k] = 0.5 * (lo + hi)
    return out
