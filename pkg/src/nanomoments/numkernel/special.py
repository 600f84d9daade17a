"""Log-gamma by the Lanczos approximation (g = 7, nine terms)."""

import math

_G = 7.0
_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def log_gamma(x):
    """Natural log of the gamma function for real ``x > 0``."""
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"log_gamma is defined here for x > 0, got {x}")
    if x < 0.5:
        # reflection keeps the series in its accurate range
        return math.log(math.pi / math.sin(math.pi * x)) - log_gamma(1.0 - x)
    if x == 1.0 or x == 2.0:
        return 0.0
    y = x - 1.0
    acc = _COEF[0]
    for i in range(1, len(_COEF)):
        acc += _COEF[i] / (y + i)
    t = y + _G + 0.5
    return _HALF_LOG_2PI + (y + 0.5) * math.log(t) - t + math.log(acc)


def gamma_ratio(num, den):
    """Gamma(num) / Gamma(den) computed through log_gamma."""
    return math.exp(log_gamma(num) - log_gamma(den))


def log_double_factorial_odd(m):
    """log of m!! for odd m >= -1, via (2k-1)!! = 2^k Gamma(k + 1/2) / sqrt(pi)."""
    if m % 2 == 0 or m < -1:
        raise ValueError("expected an odd integer >= -1")
    k = (m + 1) // 2
    if k == 0:
        return 0.0
    return k * math.log(2.0) + log_gamma(k + 0.5) - 0.5 * math.log(math.pi)


def log_factorial(k):
    if k < 0:
        raise ValueError("factorial of a negative integer")
    return log_gamma(k + 1.0)
