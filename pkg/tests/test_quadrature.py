import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gppa import quadrature


def test_gauss_legendre_integrates_polynomials():
    x, w = quadrature.gl_rule(8)
    for p in range(16):
        exact = 0.0 if p % 2 else 2.0 / (p + 1)
        assert np.sum(w * x ** p) == pytest.approx(exact, abs=1e-14)


def test_chebyshev_cumulative_matches_antiderivative():
    grid = quadrature.ChebyshevGrid(-1.0, 2.0, 41)
    y = np.exp(grid.t) * np.cos(3 * grid.t)
    prim = lambda t: np.exp(t) * (np.cos(3 * t) + 3 * np.sin(3 * t)) / 10
    np.testing.assert_allclose(grid.cumulative(y), prim(grid.t) - prim(-1.0), atol=1e-13)
    assert grid.integral(y) == pytest.approx(prim(2.0) - prim(-1.0), abs=1e-13)


def test_periodic_trapezoid_is_spectral():
    f = lambda t: np.exp(np.cos(t))
    # int_0^2pi exp(cos t) dt = 2 pi I0(1)
    from scipy.special import i0
    assert quadrature.periodic_trapezoid(f, 0.0, 2 * math.pi, tol=1e-13) == pytest.approx(2 * math.pi * i0(1.0), rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(x0=st.floats(-0.8, 0.8), c=st.floats(0.1, 3.0))
def test_principal_value_of_exponential(x0, c):
    # PV int_{x0-1}^{x0+1} exp(c x)/(x - x0) dx = exp(c x0) [Shi(c) * 2]
    from scipy.special import shichi
    got = quadrature.principal_value_line(lambda x: np.exp(c * x), x0, 1.0)
    assert got == pytest.approx(2 * math.exp(c * x0) * shichi(c)[0], rel=1e-10)
