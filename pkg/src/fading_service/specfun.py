"""Scalar special functions used by the analytic rate formulas.

ln Gamma, the upper incomplete gamma function, the exponential integral E1
and the modified Bessel function I0.  Everything here is pure Python on
floats; nothing keeps state between calls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext

from .errors import DomainError, NumericalFailure

EULER_GAMMA = 0.57721566490153286061
_EULER_GAMMA_STR = "0.57721566490153286060651209008240243104215933593992359880576723"
_EPS = 2.220446049250313e-16
_TINY = 1e-300


@dataclass(frozen=True)
class Accuracy:
    """Tolerance and iteration cap shared by the iterative routines."""

    rel_tol: float = 1e-12
    max_terms: int = 5000

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-6):
            raise DomainError(f"rel_tol must lie in (0, 1e-6], got {self.rel_tol}")
        if self.max_terms < 32:
            raise DomainError(f"max_terms must be >= 32, got {self.max_terms}")


DEFAULT_ACCURACY = Accuracy()


def _check_finite(name, value):
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value}")


# ---------------------------------------------------------------------------
# ln Gamma
# ---------------------------------------------------------------------------

def _zeta_table(kmax=40, n=50):
    # Euler-Maclaurin with the tail corrected through the B6 term.
    out = {}
    for k in range(2, kmax + 1):
        head = math.fsum(j ** -float(k) for j in range(1, n))
        tail = (
            n ** (1.0 - k) / (k - 1)
            + 0.5 * n ** -float(k)
            + k * n ** (-k - 1.0) / 12.0
            - k * (k + 1) * (k + 2) * n ** (-k - 3.0) / 720.0
            + k * (k + 1) * (k + 2) * (k + 3) * (k + 4) * n ** (-k - 5.0) / 30240.0
        )
        out[k] = head + tail
    return out


_ZETA = _zeta_table()

# Bernoulli numbers B_2k for the Stirling series.
_STIRLING = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6, -3617 / 510)


def _lgamma1p_taylor(z):
    """ln Gamma(1+z) for |z| <= 0.25."""
    total = -EULER_GAMMA * z
    zk = -z
    for k in range(2, 41):
        zk *= -z  # (-z)**k
        term = _ZETA[k] * zk / k
        total += term
        if abs(term) <= _EPS * abs(total) * 0.01:
            break
    return total


def stirling_remainder(s: float) -> float:
    """ln Gamma(s) - [(s - 1/2) ln s - s + ln(2 pi)/2], valid for s >= 10."""
    if s < 10.0:
        raise DomainError(f"stirling_remainder needs s >= 10, got {s}")
    inv = 1.0 / s
    inv2 = inv * inv
    p = inv
    total = 0.0
    for k, b in enumerate(_STIRLING, start=1):
        total += b / (2 * k * (2 * k - 1)) * p
        p *= inv2
    return total


def _lgamma_stirling(s):
    return (s - 0.5) * math.log(s) - s + 0.5 * math.log(2.0 * math.pi) + stirling_remainder(s)


def ln_gamma(s: float) -> float:
    """Natural log of the gamma function for real ``s > 0``."""
    s = float(s)
    _check_finite("s", s)
    if s <= 0.0:
        raise DomainError(f"ln_gamma needs s > 0, got {s}")
    if s == math.floor(s) and s <= 171:
        return math.log(math.factorial(int(s) - 1))
    if abs(s - 1.0) <= 0.25:
        return _lgamma1p_taylor(s - 1.0)
    if abs(s - 2.0) <= 0.25:
        z = s - 2.0
        return math.log1p(z) + _lgamma1p_taylor(z)
    if s >= 15.0:
        return _lgamma_stirling(s)
    shift = math.ceil(15.0 - s)
    prod = 1.0
    for i in range(shift):
        prod *= s + i
    return _lgamma_stirling(s + shift) - math.log(prod)


# ---------------------------------------------------------------------------
# Incomplete gamma
# ---------------------------------------------------------------------------

def _gamma_prefactor_log(s, x):
    return -x + s * math.log(x) - ln_gamma(s)


def _lower_series(s, x, acc):
    """Regularised lower incomplete gamma P(s, x) by its power series."""
    ap = s
    term = 1.0 / s
    total = term
    for _ in range(acc.max_terms):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) <= abs(total) * _EPS:
            return total * math.exp(_gamma_prefactor_log(s, x))
    raise NumericalFailure(
        f"incomplete gamma series did not converge (s={s}, x={x})",
        partial=total * math.exp(_gamma_prefactor_log(s, x)),
    )


def _upper_cf(s, x, acc):
    """Continued fraction for Gamma(s, x) * exp(x) * x**(-s) (modified Lentz)."""
    b = x + 1.0 - s
    c = 1.0 / _TINY
    d = 1.0 / b if b != 0.0 else 1.0 / _TINY
    h = d
    for i in range(1, acc.max_terms + 1):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) <= _EPS:
            return h
    if abs(delta - 1.0) <= acc.rel_tol:
        return h
    raise NumericalFailure(f"incomplete gamma continued fraction did not converge (s={s}, x={x})", partial=h)


def gamma_upper_regularized(s: float, x: float, acc: Accuracy = DEFAULT_ACCURACY) -> float:
    """Q(s, x) = Gamma(s, x) / Gamma(s)."""
    s, x = float(s), float(x)
    _check_finite("s", s)
    _check_finite("x", x)
    if s <= 0.0:
        raise DomainError(f"gamma_upper needs s > 0, got {s}")
    if x < 0.0:
        raise DomainError(f"gamma_upper needs x >= 0, got {x}")
    if x == 0.0:
        return 1.0
    if x < s + 1.0:
        return 1.0 - _lower_series(s, x, acc)
    return math.exp(_gamma_prefactor_log(s, x)) * _upper_cf(s, x, acc)


def gamma_upper(s: float, x: float, acc: Accuracy = DEFAULT_ACCURACY) -> float:
    """Upper incomplete gamma Gamma(s, x) = int_x^inf t^(s-1) e^(-t) dt (unregularised).

    Raises ``OverflowError`` when the result exceeds the float range
    (roughly s > 171 with small x); use :func:`gamma_upper_regularized` there.
    """
    if x >= s + 1.0 and x > 0.0:
        gamma_upper_regularized(s, x, acc)  # argument validation
        return math.exp(-x + s * math.log(x)) * _upper_cf(s, x, acc)
    q = gamma_upper_regularized(s, x, acc)
    if q == 0.0:
        return 0.0
    log_val = math.log(q) + ln_gamma(s)
    if log_val > 709.78:
        raise OverflowError(f"Gamma({s}, {x}) overflows a double")
    return math.exp(log_val)


# ---------------------------------------------------------------------------
# Exponential integral E1
# ---------------------------------------------------------------------------

def _e1_series_float(x):
    total = 0.0
    term = 1.0
    for k in range(1, 200):
        term *= -x / k
        delta = term / k
        total += delta
        if abs(delta) <= _EPS * abs(total):
            break
    return -EULER_GAMMA - math.log(x) - total


def _e1_series_decimal(x):
    # The alternating terms peak near e^x/x while E1 ~ e^-x/x, so the working
    # precision has to cover roughly 2x/ln(10) digits of cancellation.
    digits = 30 + int(math.ceil(2.0 * x / math.log(10.0)))
    with localcontext() as ctx:
        ctx.prec = digits
        xd = Decimal(x)
        threshold = Decimal(10) ** (-digits)
        total = Decimal(0)
        term = Decimal(1)
        k = 0
        while True:
            k += 1
            term = term * (-xd) / k
            delta = term / k
            total += delta
            if k > xd and abs(delta) < threshold:
                break
        value = -Decimal(_EULER_GAMMA_STR) - xd.ln() - total
        return float(value)


def e1_series(x: float) -> float:
    """E1 from its convergent power series.

    Runs in float arithmetic for ``x <= 1`` and in ``decimal`` with enough
    guard digits for larger arguments, where the float series cancels.
    """
    x = float(x)
    _check_finite("x", x)
    if x <= 0.0:
        raise DomainError(f"E1 needs x > 0, got {x}")
    if x <= 1.0:
        return _e1_series_float(x)
    return _e1_series_decimal(x)


def e1_continued_fraction(x: float, max_terms: int = 100_000) -> float:
    """E1 from its continued fraction.  Converges for every x > 0, slowly near 0."""
    x = float(x)
    _check_finite("x", x)
    if x <= 0.0:
        raise DomainError(f"E1 needs x > 0, got {x}")
    return _e1_cf_scaled(x, max_terms) * math.exp(-x)


def _e1_cf_scaled(x, max_terms):
    b = x + 1.0
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, max_terms):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) <= _EPS:
            return h
    raise NumericalFailure(f"E1 continued fraction did not converge at x={x}", partial=h * math.exp(-x))


def e1_scaled(x: float) -> float:
    """exp(x) * E1(x), finite for every x > 0 (tends to 1/x for large x)."""
    x = float(x)
    _check_finite("x", x)
    if x <= 0.0:
        raise DomainError(f"E1 needs x > 0, got {x}")
    if x < 1.0:
        return math.exp(x) * _e1_series_float(x)
    return _e1_cf_scaled(x, DEFAULT_ACCURACY.max_terms)


def exp_integral_e1(x: float) -> float:
    """E1(x) = int_x^inf e^(-t)/t dt for x > 0.

    Series below 1, continued fraction from 1 upward.
    """
    x = float(x)
    _check_finite("x", x)
    if x <= 0.0:
        raise DomainError(f"E1 needs x > 0, got {x}")
    if x < 1.0:
        return _e1_series_float(x)
    if x > 745.0:
        return 0.0
    return e1_continued_fraction(x, max_terms=DEFAULT_ACCURACY.max_terms)


# ---------------------------------------------------------------------------
# Modified Bessel I0
# ---------------------------------------------------------------------------

I0_OVERFLOW_GUARD = 700.0
_I0_SERIES_LIMIT = 30.0


def _i0_series(x):
    q = 0.25 * x * x
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        term *= q / (k * k)
        total += term
        if term <= _EPS * total:
            return total


def _i0_asymptotic(x):
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        nxt = term * (2 * k - 1) ** 2 / (8.0 * k * x)
        if nxt >= term:
            break
        term = nxt
        total += term
        if term <= _EPS * total:
            break
    return math.exp(x) / math.sqrt(2.0 * math.pi * x) * total


def bessel_i0(x: float) -> float:
    """Modified Bessel function of the first kind, order zero, for 0 <= x <= 700."""
    x = float(x)
    _check_finite("x", x)
    if x < 0.0:
        raise DomainError(f"bessel_i0 needs x >= 0, got {x}")
    if x > I0_OVERFLOW_GUARD:
        raise OverflowError(f"bessel_i0 argument {x} exceeds the overflow guard {I0_OVERFLOW_GUARD}")
    if x <= _I0_SERIES_LIMIT:
        return _i0_series(x)
    return _i0_asymptotic(x)
