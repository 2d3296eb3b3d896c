"""Quadrature helpers used across the package.

Composite Gauss-Legendre panels with panel doubling, a periodic trapezoid
rule, a principal-value integral by symmetric singularity subtraction and a
Chebyshev grid for time-ordered (cumulative) integrals.
"""

import numpy as np
from numpy.polynomial.chebyshev import chebint, chebval, chebvander
from numpy.polynomial.legendre import leggauss

from .errors import ConvergenceError

_GL_CACHE = {}


def gl_rule(order):
    """Gauss-Legendre nodes and weights on [-1, 1] (cached)."""
    if order not in _GL_CACHE:
        _GL_CACHE[order] = leggauss(order)
    return _GL_CACHE[order]


def panel_nodes(edges, order=24):
    """Nodes and weights of a composite rule over consecutive panel edges."""
    x, w = gl_rule(order)
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo))[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def integrate_panels(f, a, b, order=24, tol=1e-10, panels=1, max_panels=4096):
    """Composite Gauss-Legendre integral of a vectorised ``f`` over [a, b].

    The panel count doubles until two successive results differ by less
    than ``tol`` (absolute, or relative once the integral exceeds one).

    Returns
    -------
    complex or float
    """
    prev = None
    n = panels
    while n <= max_panels:
        nodes, weights = panel_nodes(np.linspace(a, b, n + 1), order)
        val = np.sum(weights * f(nodes))
        if prev is not None and abs(val - prev) < tol * max(1.0, abs(val)):
            return val
        prev = val
        n *= 2
    raise ConvergenceError(f"panel quadrature on [{a}, {b}] did not converge")


def periodic_trapezoid(f, t0, period, tol=1e-10, samples=64, max_samples=1 << 18):
    """Uniform trapezoid rule over one period with sample doubling."""
    prev = None
    m = samples
    while m <= max_samples:
        t = t0 + period * np.arange(m) / m
        val = period * np.mean(f(t))
        if prev is not None and abs(val - prev) < tol * max(1.0, abs(val)):
            return val
        prev = val
        m *= 2
    raise ConvergenceError("periodic trapezoid rule did not converge")


def principal_value_line(F, x0, span, order=24, tol=1e-10):
    """Principal value of the integral of F(x)/(x - x0) over the real line.

    Uses the symmetric subtraction PV = int_0^span [F(x0+s) - F(x0-s)]/s ds,
    whose integrand is regular at s = 0.  ``F`` must be negligible beyond
    ``span`` from ``x0``.
    """
    def g(s):
        return (F(x0 + s) - F(x0 - s)) / s

    return integrate_panels(g, 0.0, span, order=order, tol=tol, panels=8)


class ChebyshevGrid:
    """Chebyshev-Lobatto nodes on [a, b] with a spectral integration matrix.

    ``cumulative(y)`` returns int_a^{t_j} y on every node; for smooth
    integrands the error decays exponentially with the node count.
    """

    def __init__(self, a, b, n):
        x = -np.cos(np.pi * np.arange(n) / (n - 1))
        self.t = 0.5 * (b - a) * x + 0.5 * (b + a)
        vander = chebvander(x, n - 1)
        # antiderivative of each basis polynomial, zero at x = -1
        anti = np.column_stack([chebval(x, chebint(np.eye(n)[k], lbnd=-1)) for k in range(n)])
        self.matrix = 0.5 * (b - a) * anti @ np.linalg.inv(vander)

    def cumulative(self, y):
        return np.asarray(y) @ self.matrix.T

    def integral(self, y):
        return np.asarray(y) @ self.matrix[-1]
