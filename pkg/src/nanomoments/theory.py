"""Leading-order predictions for E|P'/P(1 - a/N)|^K.

``predict`` gives the Gamma-function closed forms (real K), ``limit_integral``
evaluates the same leading terms from their defining integrals by quadrature,
and ``integer_moment`` gives the older integer-moment formulas.  All values are
magnitudes: sign factors ``(-1)^K`` of non-absolute moments are dropped.
"""

import math
from dataclasses import dataclass

from .ensembles import Family
from .numkernel import log_gamma, quad_adaptive
from .numkernel.special import log_double_factorial_odd, log_factorial

# smallest admissible K, and whether the bound is strict
K_THRESHOLD = {
    Family.UNITARY: 1.0,
    Family.SO_EVEN: 1.0,
    Family.USP: 3.0,
    Family.SO_ODD: 0.0,
}

INTEGER_FLOOR = {
    Family.UNITARY: 1,
    Family.SO_EVEN: 2,
    Family.SO_ODD: 1,
    Family.USP: 4,
}


class ValidityError(ValueError):
    """Moment order outside the range where the asymptotic formula holds."""


def check_k(family, k):
    family = Family.parse(family)
    thr = K_THRESHOLD[family]
    if not k > thr:
        raise ValidityError(f"{family.value}: the asymptotic requires K>{thr:g}, got K={k:g}")
    return family


@dataclass(frozen=True)
class MomentQuery:
    family: Family
    n: int
    a: float
    k: float

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        if self.n < 1 or not self.a > 0:
            raise ValueError("need n >= 1 and a > 0")

    @property
    def valid(self):
        return self.k > K_THRESHOLD[self.family]


@dataclass(frozen=True)
class Prediction:
    value: float
    valid: bool
    form: str


def _unitary_gamma_ratio(k):
    return math.exp(log_gamma((k - 1.0) / 2.0) - log_gamma(k / 2.0))


def _so_even_gamma_ratio(k):
    return math.exp(log_gamma(k - 0.5) - log_gamma(k))


def _usp_gamma_ratio(k):
    return math.exp(log_gamma(k - 1.5) - log_gamma(k))


def predict(q):
    """Closed-form leading asymptotic of E|P'/P(1 - a/N)|^K."""
    fam = check_k(q.family, q.k)
    n, a, k = float(q.n), q.a, q.k
    ratio = n / a
    sqpi = math.sqrt(math.pi)
    if fam is Family.UNITARY:
        v = n / (2.0 * math.pi) * ratio ** (k - 1.0) * sqpi * _unitary_gamma_ratio(k)
        form = "gamma:U"
    elif fam is Family.SO_EVEN:
        v = 2.0 * n / math.pi * 2.0 ** k * ratio ** (k - 1.0) * 0.5 * sqpi * _so_even_gamma_ratio(k)
        form = "gamma:SO(2N)"
    elif fam is Family.USP:
        v = 2.0 * n ** 3 / (3.0 * math.pi) * 2.0 ** k * ratio ** (k - 3.0) * 0.25 * sqpi * _usp_gamma_ratio(k)
        form = "gamma:USp(2N)"
    else:
        v = ratio ** k * (1.0 - k * a)
        form = "two-term:SO(2N+1)"
    return Prediction(v, True, form)


def integer_moment(family, k_int, n, a):
    """Integer-moment asymptotics, as magnitudes.

    Unitary: E|P'/P|^(2m) for m = ``k_int``.  The other families: E(P'/P)^K
    with K = ``k_int``.  The SO(2N) formula uses the power ``a^(1-K)``.
    """
    family = Family.parse(family)
    k = int(k_int)
    if k != k_int or k < INTEGER_FLOOR[family]:
        raise ValidityError(f"{family.value}: integer formula needs an integer K>={INTEGER_FLOOR[family]}")
    n = float(n)
    if family is Family.UNITARY:
        log_binom = log_factorial(2 * k - 2) - 2.0 * log_factorial(k - 1)
        return math.exp(2 * k * math.log(n) - (2 * k - 1) * math.log(2.0 * a) + log_binom)
    if family is Family.SO_EVEN:
        lg = log_double_factorial_odd(2 * k - 3) - log_factorial(k - 1)
        return 2.0 * math.exp(k * math.log(n) + (1 - k) * math.log(a) + lg)
    if family is Family.USP:
        lg = log_double_factorial_odd(2 * k - 5) - log_factorial(k - 1)
        return 2.0 / 3.0 * math.exp(k * math.log(n) + (3 - k) * math.log(a) + lg)
    return (n / a) ** k - n ** k / a ** (k - 1) * k


def so_even_integer_moment_as_printed(k_int, n, a):
    """The SO(2N) integer formula with the denominator ``a^(2K-1)`` taken literally."""
    k = int(k_int)
    lg = log_double_factorial_odd(2 * k - 3) - log_factorial(k - 1)
    return 2.0 * math.exp(k * math.log(n) - (2 * k - 1) * math.log(a) + lg)


def limit_integral(q, rel_tol=1e-11):
    """Leading asymptotic from its defining integral, by adaptive quadrature."""
    fam = check_k(q.family, q.k)
    n, k = float(q.n), q.k
    b = q.a / n
    b2 = b * b
    if fam is Family.UNITARY:
        val = quad_adaptive(lambda t: (1.0 / (b2 + t * t)) ** (k / 2.0), -math.inf, math.inf, rel_tol=rel_tol)
        return n / (2.0 * math.pi) * val
    if fam is Family.SO_EVEN:
        val = quad_adaptive(lambda t: (2.0 * b / (b2 + t * t)) ** k, 0.0, math.inf, rel_tol=rel_tol)
        return 2.0 * n / math.pi * val
    if fam is Family.USP:
        val = quad_adaptive(lambda t: (2.0 * b / (b2 + t * t)) ** k * t * t, 0.0, math.inf, rel_tol=rel_tol)
        return 2.0 * n ** 3 / (3.0 * math.pi) * val
    raise ValueError("SO(2N+1) has no limit-integral form; use predict")
