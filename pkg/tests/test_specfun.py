import math

import mpmath as mp
import numpy as np
import pytest
import scipy.special as sc
from hypothesis import given, settings
from hypothesis import strategies as st

from fading_service import specfun
from fading_service.errors import DomainError

mp.mp.dps = 40


def rel(a, b):
    return abs(a - b) / abs(b)


# --- ln Gamma ---------------------------------------------------------------

@pytest.mark.parametrize("s", [1e-8, 1e-3, 0.1, 0.5, 0.75, 0.9, 1.0, 1.1, 1.3, 1.8, 2.0, 2.2, 2.5,
                               3.7, 9.99, 14.5, 15.0, 33.3, 171.0, 171.5, 1e4, 1e7, 1e12])
def test_ln_gamma_against_mpmath(s):
    expected = float(mp.loggamma(mp.mpf(s)))
    got = specfun.ln_gamma(s)
    if abs(expected) < 1e-3:
        assert abs(got - expected) < 1e-16
    else:
        assert rel(got, expected) < 5e-14


def test_ln_gamma_half():
    assert specfun.ln_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), rel=1e-15)


@given(st.floats(min_value=1e-3, max_value=1e6))
@settings(max_examples=200, deadline=None)
def test_ln_gamma_recurrence(s):
    lhs = specfun.ln_gamma(s + 1.0) - specfun.ln_gamma(s)
    assert lhs == pytest.approx(math.log(s), rel=1e-10, abs=1e-12 * max(1.0, abs(specfun.ln_gamma(s))))


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
def test_ln_gamma_domain(bad):
    with pytest.raises(DomainError):
        specfun.ln_gamma(bad)


def test_stirling_remainder_domain():
    with pytest.raises(DomainError):
        specfun.stirling_remainder(5.0)
    s = 123.4
    expected = float(mp.loggamma(s) - ((s - 0.5) * mp.log(s) - s + mp.log(2 * mp.pi) / 2))
    assert rel(specfun.stirling_remainder(s), expected) < 1e-13


# --- incomplete gamma -------------------------------------------------------

GRID = [(s, x) for s in (0.5, 1.0, 2.5, 7.0, 30.0, 150.0) for x in (1e-6, 0.3, 1.0, 4.0, 20.0, 200.0)]


@pytest.mark.parametrize("s,x", GRID)
def test_gamma_upper_regularized_against_scipy(s, x):
    expected = sc.gammaincc(s, x)
    got = specfun.gamma_upper_regularized(s, x)
    if expected < 1e-290:
        assert got < 1e-280
    else:
        assert rel(got, expected) < 1e-11


@pytest.mark.parametrize("s,x", [(2.5, 1.0), (0.5, 0.01), (10.0, 3.0), (1.0, 50.0), (60.0, 61.0)])
def test_gamma_upper_against_mpmath(s, x):
    expected = float(mp.gammainc(mp.mpf(s), mp.mpf(x)))
    assert rel(specfun.gamma_upper(s, x), expected) < 1e-12


def test_gamma_upper_known_value():
    # Gamma(5/2, 1), mpmath to 15 digits
    assert specfun.gamma_upper(2.5, 1.0) == pytest.approx(1.1288027918891022, rel=1e-13)


def test_gamma_upper_special_cases():
    assert specfun.gamma_upper(3.0, 0.0) == pytest.approx(2.0, rel=1e-15)
    for x in (0.1, 1.0, 5.0, 40.0):
        assert specfun.gamma_upper(1.0, x) == pytest.approx(math.exp(-x), rel=1e-13)
    assert specfun.gamma_upper_regularized(4.0, 0.0) == 1.0


@given(st.floats(min_value=0.2, max_value=40.0), st.floats(min_value=1e-3, max_value=60.0))
@settings(max_examples=150, deadline=None)
def test_gamma_upper_recurrence(s, x):
    # Gamma(s+1, x) = s Gamma(s, x) + x**s e**-x
    lhs = specfun.gamma_upper(s + 1.0, x)
    rhs = s * specfun.gamma_upper(s, x) + math.exp(s * math.log(x) - x)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_gamma_upper_overflow_and_domain():
    with pytest.raises(OverflowError):
        specfun.gamma_upper(200.0, 1.0)
    with pytest.raises(DomainError):
        specfun.gamma_upper(0.0, 1.0)
    with pytest.raises(DomainError):
        specfun.gamma_upper(1.0, -1.0)


# --- E1 ---------------------------------------------------------------------

@pytest.mark.parametrize("x", np.logspace(-10, math.log10(700.0), 37))
def test_e1_against_mpmath(x):
    expected = float(mp.e1(mp.mpf(float(x))))
    assert rel(specfun.exp_integral_e1(x), expected) < 1e-13


@pytest.mark.parametrize("x", [0.5, 1.0, 2.0, 5.0, 12.0, 40.0])
def test_e1_series_and_continued_fraction_agree(x):
    assert rel(specfun.e1_series(x), specfun.e1_continued_fraction(x)) < 1e-13


@pytest.mark.parametrize("x", [1e-6, 0.1, 1.0, 10.0, 1e3, 1e6, 1e10])
def test_e1_scaled(x):
    expected = float(mp.e ** mp.mpf(x) * mp.e1(mp.mpf(x)))
    assert rel(specfun.e1_scaled(x), expected) < 1e-13


def test_e1_known_values():
    assert specfun.exp_integral_e1(1.0) == pytest.approx(0.21938393439552029, rel=1e-14)
    assert specfun.exp_integral_e1(0.1) == pytest.approx(1.8229239584193906, rel=1e-14)
    assert specfun.exp_integral_e1(800.0) == 0.0


def test_e1_domain():
    for f in (specfun.exp_integral_e1, specfun.e1_series, specfun.e1_continued_fraction, specfun.e1_scaled):
        with pytest.raises(DomainError):
            f(0.0)


def test_euler_constant_against_printed_digits():
    # the printed 9-digit value differs from the true constant by 1e-8
    assert abs(specfun.EULER_GAMMA - 0.577215655) < 1e-8
    assert specfun.EULER_GAMMA == pytest.approx(float(mp.euler), rel=1e-16)


# --- I0 ---------------------------------------------------------------------

@pytest.mark.parametrize("x", [0.0, 1e-5, 0.5, 1.0, 2.0, 7.5, 29.9, 30.0, 30.1, 55.0, 200.0, 699.0])
def test_i0_against_scipy(x):
    assert rel(specfun.bessel_i0(x), sc.i0(x)) < 5e-14


def test_i0_known_values_and_guard():
    assert specfun.bessel_i0(0.0) == 1.0
    assert specfun.bessel_i0(1.0) == pytest.approx(1.2660658777520082, rel=1e-15)
    with pytest.raises(OverflowError):
        specfun.bessel_i0(701.0)
    with pytest.raises(DomainError):
        specfun.bessel_i0(-1.0)


def test_accuracy_validation():
    with pytest.raises(DomainError):
        specfun.Accuracy(rel_tol=1e-3)
    with pytest.raises(DomainError):
        specfun.Accuracy(max_terms=4)
    loose = specfun.Accuracy(rel_tol=1e-8, max_terms=64)
    assert specfun.gamma_upper_regularized(2.0, 1.0, loose) == pytest.approx(2.0 / math.e, rel=1e-8)
