"""Deterministic service rates of i.i.d. fading channels.

For a Nakagami-m channel the service rate is ``W * c0`` with

    c0 = 1/Gamma(m) * int_0^inf ln(a z + 1) z**(m-1) e**(-z) dz,   a = rho / m,

evaluated here by adaptive Gauss-Kronrod quadrature.  Rayleigh has the closed
form ``W e**(1/rho) E1(1/rho)``, the no-fading limit is ``W ln(1 + rho)`` and an
arbitrary power-gain density is handled by direct quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quadrature, specfun
from .channel import (
    Deterministic,
    Generic,
    LinkBudget,
    Nakagami,
    Rayleigh,
    Rician,
    rician_k_to_nakagami_m,
    support_breakpoints,
)
from .errors import DomainError, NumericalFailure

METHODS = ("quadrature", "closed_form_rayleigh", "awgn_limit", "generic_quadrature")

C0_TOLERANCE = 1e-10
AWGN_SWITCH_M = 1e6
_EPS = 2.220446049250313e-16


@dataclass(frozen=True)
class RateResult:
    """A computed service rate.

    ``c_star`` is in nats/s; ``c0``, ``lower_bound_a`` and ``upper_bound`` are
    dimensionless (per Hz).  The bounds sandwich ``c0``; construction fails if
    they do not.
    """

    c_star: float
    method: str
    abs_error_estimate: float
    c0: float
    lower_bound_a: float
    upper_bound: float

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"unknown method tag {self.method!r}")
        if self.c_star < 0 or self.c0 < 0:
            raise NumericalFailure(f"negative service rate {self.c_star}", partial=self.c_star)
        slack = self.abs_error_estimate / max(self.c_star / max(self.c0, 1e-300), 1.0) if self.c0 else 0.0
        slack += 8 * _EPS * max(abs(self.c0), abs(self.upper_bound))
        if not (self.lower_bound_a - slack <= self.c0 <= self.upper_bound + slack):
            raise NumericalFailure(
                f"c0={self.c0!r} escapes its bounds [{self.lower_bound_a!r}, {self.upper_bound!r}]",
                partial=self.c0,
                error=self.abs_error_estimate,
            )

    @property
    def c_star_bits(self) -> float:
        return self.c_star * math.log2(math.e)


def _result(c0, c0_err, link, method, lower, upper):
    return RateResult(
        c_star=link.w_hz * c0,
        method=method,
        abs_error_estimate=link.w_hz * c0_err,
        c0=c0,
        lower_bound_a=lower,
        upper_bound=upper,
    )


def _check_m(m):
    if not (math.isfinite(m) and m >= 0.5):
        raise DomainError(f"m must be >= 0.5, got {m}")


# ---------------------------------------------------------------------------
# c0 quadrature
# ---------------------------------------------------------------------------

def _gamma_log_density(m):
    """Log of the Gamma(m, 1) density as a vectorised function of z."""
    n = m - 1.0
    if n < 15.0:
        lg = specfun.ln_gamma(m)
        return lambda z: n * np.log(z) - z - lg
    # With z = n(1 + d) the log density is const - n (d - log1p(d)); this
    # avoids cancelling terms of size m that cost digits for large m.
    const = -0.5 * math.log(2.0 * math.pi * n) - specfun.stirling_remainder(n)

    def log_density(z):
        d = z / n - 1.0
        return const - n * (d - np.log1p(d))

    return log_density


def _c0_quadrature(m, a):
    """Return (c0, error estimate) for the Nakagami integral with a = a_scale."""
    log_density = _gamma_log_density(m)
    mode = max(m - 1.0, 0.0)
    sd = math.sqrt(m)
    upper = mode + 40.0 + 12.0 * sd

    def f(z):
        return np.log1p(a * z) * np.exp(log_density(z))

    pts = {0.0, upper, mode}
    for k in (3.0, 8.0):
        for p in (mode - k * sd, mode + k * sd):
            if 0.0 < p < upper:
                pts.add(p)
    knee = 1.0 / a
    if knee < upper:
        pts.add(knee)
    pts = sorted(pts)

    value = 0.0
    err = 0.0
    if m < 1.0:
        # z = t**(1/m) absorbs the z**(m-1) endpoint singularity
        lg1 = specfun.ln_gamma(m + 1.0)
        first = pts[1]

        def g(t):
            z = t ** (1.0 / m)
            return np.log1p(a * z) * np.exp(-z - lg1)

        v0, e0 = quadrature.integrate(g, [0.0, first ** m], abs_tol=1e-15, rel_tol=1e-13)
        value += v0
        err += e0
        pts = pts[1:]
    v1, e1 = quadrature.integrate(f, pts, abs_tol=1e-15, rel_tol=1e-13)
    value += v1
    err += e1
    # tail beyond `upper`, bounded with ln(1 + a z) <= a z
    err += a * m * specfun.gamma_upper_regularized(m + 1.0, upper)
    return value, err


def c0_integral(m: float, a_scale: float) -> float:
    """Normalised Nakagami capacity integral c0(m, a) (dimensionless)."""
    return _c0_with_error(m, a_scale)[0]


def _c0_with_error(m, a_scale):
    m = float(m)
    a_scale = float(a_scale)
    _check_m(m)
    if not (math.isfinite(a_scale) and a_scale >= 0):
        raise DomainError(f"a_scale must be finite and >= 0, got {a_scale}")
    if a_scale == 0.0:
        return 0.0, 0.0
    value, err = _c0_quadrature(m, a_scale)
    if err > C0_TOLERANCE * max(1.0, abs(value)):
        raise NumericalFailure(
            f"c0 quadrature error {err:.3e} exceeds tolerance (m={m}, a={a_scale})",
            partial=value,
            error=err,
        )
    return value, err


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------

def _lower_bound(m, rho):
    if rho == 0.0:
        return 0.0
    return specfun.gamma_upper_regularized(m, 1.0) * math.log1p(rho / m)


def c0_bounds(m: float, link: LinkBudget):
    """(lower, upper) bounds on c0: Q(m, 1) ln(rho/m + 1) and rho."""
    _check_m(float(m))
    rho = link.rho
    return _lower_bound(float(m), rho), rho


# ---------------------------------------------------------------------------
# Service rates
# ---------------------------------------------------------------------------

def service_rate_nakagami(m: float, link: LinkBudget) -> RateResult:
    """Service rate of an i.i.d. Nakagami-m channel by quadrature.

    For m >= 1e6 the no-fading value is returned with the Jensen-gap bound
    rho**2 / (2m) as its error estimate.
    """
    m = float(m)
    _check_m(m)
    rho = link.rho
    lower = _lower_bound(m, rho)
    if m >= AWGN_SWITCH_M:
        return _result(math.log1p(rho), rho * rho / (2.0 * m), link, "awgn_limit", lower, rho)
    c0, err = _c0_with_error(m, rho / m)
    return _result(c0, err, link, "quadrature", lower, rho)


def service_rate_rayleigh_closed(link: LinkBudget) -> RateResult:
    """Closed-form Rayleigh rate W e**beta E1(beta) with beta = 1/rho."""
    rho = link.rho
    if rho == 0.0:
        return _result(0.0, 0.0, link, "closed_form_rayleigh", 0.0, 0.0)
    c0 = specfun.e1_scaled(1.0 / rho)
    return _result(c0, 4 * _EPS * c0, link, "closed_form_rayleigh", _lower_bound(1.0, rho), rho)


def service_rate_rician(k: float, link: LinkBudget) -> RateResult:
    """Rician rate through the Nakagami approximation m = (K+1)**2/(2K+1).

    K = 0 is Rayleigh and takes the closed form.
    """
    m = rician_k_to_nakagami_m(k)
    if k == 0:
        return service_rate_rayleigh_closed(link)
    return service_rate_nakagami(m, link)


def service_rate_awgn(link: LinkBudget) -> RateResult:
    """No-fading rate W ln(1 + rho)."""
    rho = link.rho
    return _result(math.log1p(rho), 0.0, link, "awgn_limit", 0.0, rho)


def service_rate_generic(model: Generic, link: LinkBudget) -> RateResult:
    """Rate for an arbitrary power-gain density by quadrature.

    Integrates over the model's support hint, then over [hi, inf) after the
    substitution y = hi/s.  The lower bound is reported as 0; the upper bound
    is snr_scale * E[gamma], which equals rho when the density has mean pr.
    """
    if not isinstance(model, Generic):
        raise DomainError("service_rate_generic needs a Generic model")
    if abs(model.mass - 1.0) > 1e-6:
        raise DomainError(f"generic pdf is not normalised (mass {model.mass!r})")
    k = link.snr_scale
    if k == 0.0:
        return _result(0.0, 0.0, link, "generic_quadrature", 0.0, 0.0)
    lo, hi = model.support_hint
    pdf = model._checked_pdf

    def body(y):
        return np.log1p(k * y) * pdf(y)

    def tail(s):
        y = hi / s
        return np.log1p(k * y) * pdf(y) * hi / (s * s)

    def mean_body(y):
        return y * pdf(y)

    def mean_tail(s):
        y = hi / s
        return y * pdf(y) * hi / (s * s)

    bps = support_breakpoints(lo, hi)
    v_body, e_body = quadrature.integrate(body, bps, abs_tol=1e-14, rel_tol=1e-12)
    v_tail, e_tail = quadrature.integrate(tail, [0.0, 0.5, 1.0], abs_tol=1e-14, rel_tol=1e-12)
    mu_body, _ = quadrature.integrate(mean_body, bps, abs_tol=1e-14, rel_tol=1e-12)
    mu_tail, _ = quadrature.integrate(mean_tail, [0.0, 0.5, 1.0], abs_tol=1e-14, rel_tol=1e-12)
    c0 = v_body + v_tail
    return _result(c0, e_body + e_tail, link, "generic_quadrature", 0.0, k * (mu_body + mu_tail))


def service_rate(model, link: LinkBudget) -> RateResult:
    """Dispatch to the rate routine matching ``model``."""
    if isinstance(model, Rayleigh):
        return service_rate_rayleigh_closed(link)
    if isinstance(model, Nakagami):
        return service_rate_nakagami(model.m, link)
    if isinstance(model, Rician):
        return service_rate_rician(model.k, link)
    if isinstance(model, Deterministic):
        return service_rate_awgn(link)
    if isinstance(model, Generic):
        return service_rate_generic(model, link)
    raise DomainError(f"unknown fading model {model!r}")
