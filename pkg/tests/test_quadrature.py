import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fading_service import quadrature
from fading_service.errors import NumericalFailure


def test_rule_weights():
    assert quadrature.KRONROD_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)
    assert quadrature.GAUSS_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)
    assert np.allclose(quadrature.NODES, -quadrature.NODES[::-1])


@pytest.mark.parametrize("deg", [0, 1, 7, 13, 22])
def test_kronrod_exact_for_polynomials(deg):
    value, _ = quadrature.gk15(lambda x: x ** deg, 0.0, 1.0)
    assert value == pytest.approx(1.0 / (deg + 1), rel=1e-14)


def test_gauss_exact_to_degree_13():
    _, err = quadrature.gk15(lambda x: x ** 13, -0.5, 2.0)
    assert err < 1e-12


@pytest.mark.parametrize(
    "f,bps,expected",
    [
        (lambda x: 1.0 / (1.0 + x * x), [0.0, 1.0], math.pi / 4),
        (lambda x: np.abs(x - 0.3), [0.0, 0.3, 1.0], 0.29),
        (lambda x: np.exp(-x), [0.0, 1.0, 5.0, 40.0], 1.0 - math.exp(-40.0)),
    ],
)
def test_integrate_known(f, bps, expected):
    value, err = quadrature.integrate(f, bps, abs_tol=1e-13, rel_tol=1e-13)
    assert value == pytest.approx(expected, rel=1e-11, abs=1e-13)
    assert err <= 1e-11


@pytest.mark.parametrize("f,expected", [(np.sqrt, 2.0 / 3.0), (np.log, -1.0)])
def test_endpoint_singularity_limited_by_depth(f, expected):
    # bisection depth 20 caps the accuracy near a singular endpoint
    value, err = quadrature.integrate(f, [0.0, 1.0], abs_tol=1e-7, rel_tol=1e-7)
    assert value == pytest.approx(expected, abs=1e-7)
    with pytest.raises(NumericalFailure):
        quadrature.integrate(f, [0.0, 1.0], abs_tol=1e-14, rel_tol=1e-14)


def test_nonintegrable_raises_with_partial():
    with pytest.raises(NumericalFailure) as info:
        quadrature.integrate(lambda x: 1.0 / x, [0.0, 1.0])
    assert info.value.partial is not None and info.value.partial > 10


def test_nonfinite_raises():
    with pytest.raises(NumericalFailure):
        quadrature.integrate(lambda x: np.full_like(x, np.nan), [0.0, 1.0])


def test_degenerate_range():
    assert quadrature.integrate(np.sin, [1.0]) == (0.0, 0.0)


@given(st.floats(min_value=0.05, max_value=3.0), st.floats(min_value=0.1, max_value=0.9))
@settings(max_examples=60, deadline=None)
def test_additivity(scale, split):
    f = lambda x: np.exp(-scale * x) * np.cos(3 * x)
    whole, _ = quadrature.integrate(f, [0.0, 2.0])
    left, _ = quadrature.integrate(f, [0.0, 2.0 * split])
    right, _ = quadrature.integrate(f, [2.0 * split, 2.0])
    assert whole == pytest.approx(left + right, abs=1e-11)
