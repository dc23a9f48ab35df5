"""Fading models, power-gain densities, seeded samplers and the capacity map.

The power gain gamma = g**2 has mean ``pr``.  Nakagami-m power gains are
gamma distributed with shape m and scale pr/m; Rayleigh is the m = 1 case and
a Rician K-factor is mapped onto m = (K+1)**2 / (2K+1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import quadrature, specfun
from .errors import DomainError, UnsupportedOperation

RNG_ALGORITHM = (
    f"numpy-{np.__version__}:Philox4x64(SeedSequence(entropy=base_seed, spawn_key=(stream_index,)))"
    ":gamma=marsaglia-tsang"
)

INVERSE_CDF_NODES = 4096
GENERIC_NORMALIZATION_TOL = 1e-6


# ---------------------------------------------------------------------------
# Link budget
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinkBudget:
    """Physical-layer parameters of a point-to-point link (linear units).

    ``pr`` is the dimensionless mean power gain; ``rho`` is the mean SNR scale
    pr * pt / (w * n0 * d**alpha).
    """

    pt_watts: float
    n0_w_per_hz: float
    w_hz: float
    d_meters: float = 1.0
    alpha: float = 0.0
    pr: float = 1.0

    def __post_init__(self):
        for name in ("n0_w_per_hz", "w_hz", "d_meters", "pr"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be finite and > 0, got {value}")
        if not (math.isfinite(self.pt_watts) and self.pt_watts >= 0):
            raise DomainError(f"pt_watts must be finite and >= 0, got {self.pt_watts}")
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise DomainError(f"alpha must be finite and >= 0, got {self.alpha}")
        if not math.isfinite(self.rho):
            raise DomainError("link parameters give a non-finite SNR scale")

    @property
    def snr_scale(self) -> float:
        """SNR per unit power gain: pt * d**-alpha / (w * n0)."""
        return self.pt_watts / (self.w_hz * self.n0_w_per_hz * self.d_meters ** self.alpha)

    @property
    def rho(self) -> float:
        return self.pr * self.snr_scale

    @classmethod
    def from_rho(cls, rho: float, w_hz: float = 1000.0) -> "LinkBudget":
        """Canonical link with d = 1, alpha = 0, pr = 1 and the given mean SNR scale."""
        if not (math.isfinite(rho) and rho >= 0):
            raise DomainError(f"rho must be finite and >= 0, got {rho}")
        if rho == 0:
            return cls(pt_watts=0.0, n0_w_per_hz=1.0 / w_hz, w_hz=w_hz)
        return cls(pt_watts=1.0, n0_w_per_hz=1.0 / (rho * w_hz), w_hz=w_hz)


# ---------------------------------------------------------------------------
# Fading models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Nakagami:
    m: float

    def __post_init__(self):
        if not (math.isfinite(self.m) and self.m >= 0.5):
            raise DomainError(f"Nakagami m must be >= 0.5, got {self.m}")


@dataclass(frozen=True)
class Rayleigh:
    pass


@dataclass(frozen=True)
class Rician:
    k: float

    def __post_init__(self):
        if not (math.isfinite(self.k) and self.k >= 0):
            raise DomainError(f"Rician K must be >= 0, got {self.k}")

    @property
    def m(self) -> float:
        return rician_k_to_nakagami_m(self.k)


@dataclass(frozen=True)
class Deterministic:
    """No fading: gamma equals pr on every draw."""


Sampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class Generic:
    """Arbitrary power-gain density on ``support_hint = (lo, hi)``.

    ``pdf`` must accept and return numpy arrays.  The density has to carry
    all but 1e-6 of its mass inside the hint; this is checked on construction.
    ``sampler(rng, n)`` is optional; see :meth:`with_inverse_cdf`.
    """

    pdf: Callable[[np.ndarray], np.ndarray]
    support_hint: tuple
    sampler: Optional[Sampler] = field(default=None, compare=False)
    mass: float = field(default=float("nan"), init=False, compare=False)

    def __post_init__(self):
        lo, hi = (float(v) for v in self.support_hint)
        if not (0 <= lo < hi and math.isfinite(hi)):
            raise DomainError(f"support_hint must satisfy 0 <= lo < hi < inf, got {self.support_hint}")
        object.__setattr__(self, "support_hint", (lo, hi))
        mass, _ = quadrature.integrate(self._checked_pdf, support_breakpoints(lo, hi), abs_tol=1e-10, rel_tol=0)
        if abs(mass - 1.0) > GENERIC_NORMALIZATION_TOL:
            raise DomainError(
                f"generic pdf integrates to {mass!r} over {self.support_hint}; "
                f"need 1 within {GENERIC_NORMALIZATION_TOL} (widen the support hint?)"
            )
        object.__setattr__(self, "mass", mass)

    def _checked_pdf(self, y):
        values = np.asarray(self.pdf(np.asarray(y, dtype=float)), dtype=float)
        if values.shape != np.shape(y):
            raise DomainError("generic pdf must be vectorised (array in, same-shape array out)")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise DomainError("generic pdf returned negative or non-finite values")
        return values

    def with_inverse_cdf(self, nodes: int = INVERSE_CDF_NODES) -> "Generic":
        """Copy of this model that samples from a tabulated inverse CDF."""
        return Generic(self.pdf, self.support_hint, sampler=_tabulated_inverse_cdf(self, nodes))


FadingModel = Union[Nakagami, Rayleigh, Rician, Deterministic, Generic]


def support_breakpoints(lo, hi, n=17):
    if lo > 0:
        return np.geomspace(lo, hi, n)
    return np.concatenate([[0.0], np.geomspace(hi * 1e-9, hi, n)])


def _tabulated_inverse_cdf(model, nodes):
    lo, hi = model.support_hint
    if lo > 0:
        grid = np.geomspace(lo, hi, nodes)
    else:
        grid = np.concatenate([[0.0], np.geomspace(hi * 1e-12, hi, nodes - 1)])
    a, b = grid[:-1], grid[1:]
    half = 0.5 * (b - a)
    centre = 0.5 * (a + b)
    pts = centre[:, None] + half[:, None] * quadrature.NODES[None, :]
    vals = model._checked_pdf(pts.ravel()).reshape(pts.shape)
    panel = half * (vals @ quadrature.KRONROD_WEIGHTS)
    cdf = np.concatenate([[0.0], np.cumsum(panel)])
    cdf /= cdf[-1]
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    cdf_k, grid_k = cdf[keep], grid[keep]

    def sample(rng, n):
        return np.interp(rng.random(n), cdf_k, grid_k)

    return sample


def lognormal_power(sigma: float, pr: float = 1.0) -> Generic:
    """Lognormal power gain with log-standard-deviation ``sigma`` and mean ``pr``.

    Sampling is exact (exponentiated normals); the support hint spans 12 sigma
    on either side of the log-mean.
    """
    sigma, pr = float(sigma), float(pr)
    if not (math.isfinite(sigma) and sigma > 0):
        raise DomainError(f"lognormal sigma must be > 0, got {sigma}")
    if not (math.isfinite(pr) and pr > 0):
        raise DomainError(f"pr must be > 0, got {pr}")
    mu = math.log(pr) - 0.5 * sigma * sigma
    norm = 1.0 / (sigma * math.sqrt(2.0 * math.pi))

    def pdf(y):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        pos = y > 0
        z = (np.log(y[pos]) - mu) / sigma
        out[pos] = norm * np.exp(-0.5 * z * z) / y[pos]
        return out

    def sampler(rng, n):
        return np.exp(mu + sigma * rng.standard_normal(n))

    return Generic(pdf, (math.exp(mu - 12 * sigma), math.exp(mu + 12 * sigma)), sampler=sampler)


def rician_k_to_nakagami_m(k: float) -> float:
    """Nakagami m that approximates a Rician channel with K-factor ``k``."""
    k = float(k)
    if not (math.isfinite(k) and k >= 0):
        raise DomainError(f"Rician K must be >= 0, got {k}")
    return (k + 1.0) ** 2 / (2.0 * k + 1.0)


def nakagami_m_of(model) -> Optional[float]:
    """The Nakagami m a model maps onto, or None for Deterministic/Generic."""
    if isinstance(model, Nakagami):
        return model.m
    if isinstance(model, Rayleigh):
        return 1.0
    if isinstance(model, Rician):
        return model.m
    return None


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------

def _nakagami_power_pdf(m, pr, gamma):
    lg = specfun.ln_gamma(m)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = m * math.log(m / pr) + (m - 1.0) * np.log(gamma) - m * gamma / pr - lg
        out = np.exp(logp)
    zero = gamma == 0
    if np.any(zero):
        # boundary singularity for m < 1 is reported as +inf, not an error
        at_zero = math.inf if m < 1 else (m / pr if m == 1 else 0.0)
        out = np.where(zero, at_zero, out)
    return out


def power_gain_pdf(model: FadingModel, pr: float, gamma):
    """Density of the power gain at ``gamma`` (scalar or array)."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0) or np.any(np.isnan(g)):
        raise DomainError("power gain must be >= 0")
    if not pr > 0:
        raise DomainError(f"pr must be > 0, got {pr}")
    if isinstance(model, Rayleigh):
        out = np.exp(-g / pr) / pr
    elif isinstance(model, (Nakagami, Rician)):
        out = _nakagami_power_pdf(model.m, pr, g)
    elif isinstance(model, Generic):
        out = model._checked_pdf(g)
    elif isinstance(model, Deterministic):
        raise UnsupportedOperation("the deterministic model is a point mass and has no density")
    else:
        raise DomainError(f"unknown fading model {model!r}")
    return float(out) if np.ndim(out) == 0 else out


def rician_magnitude_pdf(g, k: float, pr: float):
    """Exact Rician density of the magnitude g (validation path only)."""
    g = np.asarray(g, dtype=float)
    if np.any(g < 0):
        raise DomainError("magnitude must be >= 0")
    arg = 2.0 * g * math.sqrt(k * (k + 1.0) / pr)
    log_i0 = np.array([math.log(specfun.bessel_i0(x)) for x in np.ravel(arg)]).reshape(g.shape)
    with np.errstate(divide="ignore"):
        logp = np.log(2.0 * g * (k + 1.0) / pr) - k - (k + 1.0) * g * g / pr + log_i0
    out = np.exp(logp)
    return float(out) if out.ndim == 0 else out


def rician_power_pdf_exact(gamma, k: float, pr: float):
    """Exact Rician density of the power gain, p_g(sqrt(gamma)) / (2 sqrt(gamma))."""
    gamma = np.asarray(gamma, dtype=float)
    root = np.sqrt(gamma)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.asarray(rician_magnitude_pdf(root, k, pr)) / (2.0 * root)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Random streams and samplers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RngStream:
    """Identifies one reproducible random stream."""

    base_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not (0 <= int(self.base_seed) < 2 ** 64):
            raise DomainError(f"base_seed must be a 64-bit unsigned integer, got {self.base_seed}")
        if int(self.stream_index) < 0:
            raise DomainError(f"stream_index must be >= 0, got {self.stream_index}")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.base_seed), spawn_key=(int(self.stream_index),))
        return np.random.Generator(np.random.Philox(seq))


def _as_generator(rng):
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def _standard_gamma_ge1(a, rng, n):
    """Marsaglia-Tsang squeeze/rejection draws from Gamma(a, 1), a >= 1."""
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(n)
    filled = 0
    while filled < n:
        want = n - filled
        batch = int(want * 1.05) + 16
        x = rng.standard_normal(batch)
        u = rng.random(batch)
        v = 1.0 + c * x
        pos = v > 0
        v3 = np.where(pos, v, 1.0) ** 3
        x2 = x * x
        with np.errstate(divide="ignore"):
            accept = pos & (
                (u < 1.0 - 0.0331 * x2 * x2)
                | (np.log(u) < 0.5 * x2 + d * (1.0 - v3 + np.log(v3)))
            )
        got = (d * v3[accept])[:want]
        out[filled:filled + got.size] = got
        filled += got.size
    return out


def gamma_variates(shape: float, scale: float, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` Gamma(shape, scale) draws; shapes below 1 use the U**(1/shape) boost."""
    if shape >= 1.0:
        return scale * _standard_gamma_ge1(shape, rng, n)
    base = _standard_gamma_ge1(shape + 1.0, rng, n)
    return scale * base * rng.random(n) ** (1.0 / shape)


def sample_power_gain(model: FadingModel, pr: float, rng, size: Optional[int] = None):
    """Draw power gains.  ``rng`` is an :class:`RngStream` or a numpy Generator."""
    gen = _as_generator(rng)
    n = 1 if size is None else int(size)
    if isinstance(model, Deterministic):
        out = np.full(n, float(pr))
    elif isinstance(model, Rayleigh):
        out = pr * gen.standard_exponential(n)
    elif isinstance(model, (Nakagami, Rician)):
        m = model.m
        out = gamma_variates(m, pr / m, gen, n)
    elif isinstance(model, Generic):
        if model.sampler is None:
            raise UnsupportedOperation(
                "this generic model has no sampler; build one with "
                "Generic.with_inverse_cdf() (tabulated inverse CDF)"
            )
        out = np.asarray(model.sampler(gen, n), dtype=float)
    else:
        raise DomainError(f"unknown fading model {model!r}")
    return float(out[0]) if size is None else out


def sample_rician_exact(k: float, pr: float, rng, size: int) -> np.ndarray:
    """Exact Rician power gains from a LOS phasor plus complex Gaussian scatter."""
    gen = _as_generator(rng)
    los = math.sqrt(k * pr / (k + 1.0))
    sigma = math.sqrt(pr / (2.0 * (k + 1.0)))
    re = los + sigma * gen.standard_normal(size)
    im = sigma * gen.standard_normal(size)
    return re * re + im * im


# ---------------------------------------------------------------------------
# Capacity
# ---------------------------------------------------------------------------

def instantaneous_capacity(gamma, link: LinkBudget):
    """W ln(1 + gamma * pt * d**-alpha / (W n0)) in nats/s."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise DomainError("power gain must be >= 0")
    out = link.w_hz * np.log1p(g * link.snr_scale)
    return float(out) if out.ndim == 0 else out
