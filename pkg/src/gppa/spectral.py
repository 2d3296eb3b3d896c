"""Instantaneous spectra, flip amplitudes and their Fourier decomposition.

Scaled units hbar = m = 1 are used throughout.  A model describes the
instantaneous eigenproblem of H(t); everything else in the package is built
from four ingredients defined here:

* the flip amplitude Phi_nm(t) = <n_t| i d/dt |m_t>  (n != m),
* its phase-dressed form phi_nm(t), carrying exp(i int E_n - i int E_m),
* the shifted flip Phi~_nm(t) with the mean energies removed,
* the Fourier table of Phi~ over a window [-T, T] with base frequency w.

For T = inf the table holds Fourier transforms
B^(q) = (2 pi)^(-1/2) int Phi~(t) exp(i q t) dt instead of discrete
coefficients; the two are related by B(nu) = sqrt(2 pi / 2T) B^(w nu).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (AliasingError, DegenerateLevelsError, ModeError,
                     WindowMismatchError)
from .quadrature import integrate_panels

CROSSING_TOL = 1e-12


@dataclass(frozen=True, order=True)
class StateIndex:
    """Label of an instantaneous eigenstate.

    ``kind`` is ``"discrete"`` (value: integer n >= 0) or ``"continuum"``
    (value: momentum k > 0).  Continuum labels compare by exact value, so
    they identify nodes of an explicit quadrature grid.
    """

    kind: str
    value: float

    def __post_init__(self):
        if self.kind == "discrete":
            if int(self.value) != self.value or self.value < 0:
                raise ValueError(f"discrete index must be a non-negative integer, got {self.value}")
            object.__setattr__(self, "value", int(self.value))
        elif self.kind == "continuum":
            if not (math.isfinite(self.value) and self.value > 0):
                raise ValueError(f"continuum momentum must be positive and finite, got {self.value}")
            object.__setattr__(self, "value", float(self.value))
        else:
            raise ValueError(f"unknown state kind {self.kind!r}")

    @property
    def is_discrete(self):
        return self.kind == "discrete"

    def __repr__(self):
        return f"{'n' if self.is_discrete else 'k'}={self.value}"


def discrete(n):
    return StateIndex("discrete", n)


def continuum(k):
    return StateIndex("continuum", k)


def as_state(x):
    """Accept a StateIndex or a bare integer (discrete)."""
    return x if isinstance(x, StateIndex) else discrete(x)


class InstantModel:
    """Instantaneous spectrum of a driven Hamiltonian.

    Subclasses implement ``energy`` and either a closed-form ``flip`` or an
    ``overlap`` <n_t|m_s> from which flips follow by finite differences.
    Energies and closed-form flips must accept numpy arrays of times.
    """

    period: float | None = None
    units = {"hbar": 1.0, "mass": 1.0, "frequency": 1.0}

    def energy(self, n, t):
        raise NotImplementedError

    def renormalized_energy(self, n, t):
        # Real eigenfunctions have no Berry connection, so Ebar = E.
        return self.energy(n, t)

    def flip(self, n, m, t):
        raise NotImplementedError

    def overlap(self, n, m, t, s):
        raise NotImplementedError

    def time_scale(self):
        """Characteristic time used for finite-difference steps."""
        return self.period if self.period is not None else 1.0

    def support(self):
        """Interval outside which all flips vanish (needed when T = inf)."""
        return None

    def phase_integral(self, n, ta, tb):
        """int_{ta}^{tb} Ebar_n dt (numerical unless overridden)."""
        n = as_state(n)
        return integrate_panels(lambda t: self.renormalized_energy(n, t), ta, tb)

    def mean_energy(self, n, window):
        ta, tb = window
        if not (math.isfinite(ta) and math.isfinite(tb)):
            raise ModeError("mean energy over an infinite window needs a model override")
        return self.phase_integral(n, ta, tb) / (tb - ta)

    def dressed_phase(self, n, t, origin, eps):
        """int_{origin}^{t} (Ebar_n - eps) dtau, elementwise in ``t``."""
        t = np.asarray(t, dtype=float)
        flat = [self.phase_integral(n, origin, ti) - eps * (ti - origin) for ti in t.ravel()]
        return np.reshape(flat, t.shape)


@dataclass(frozen=True)
class MeanEnergy:
    """Window averages eps_n of the renormalized energies.

    ``origin`` is the reference time of all phase integrals entering the
    shifted flips (a gauge choice that drops out of diagonal quantities).
    """

    epsilon: dict
    window: tuple
    origin: float = 0.0

    def __getitem__(self, n):
        n = as_state(n)
        if n in self.epsilon:
            return self.epsilon[n]
        if not n.is_discrete:
            # continuum energies are time independent
            return 0.5 * n.value ** 2
        raise KeyError(n)


def mean_energies(model, states, window, origin=0.0):
    eps = {as_state(s): float(model.mean_energy(as_state(s), window)) for s in states}
    return MeanEnergy(eps, tuple(window), origin)


# ---------------------------------------------------------------------------
# flips

def _finite_difference_flip(model, n, m, t):
    h = 1e-5 * model.time_scale()

    def central(step):
        return (model.overlap(n, m, t, t + step) - model.overlap(n, m, t, t - step)) / (2 * step)

    # one Richardson step removes the O(h^2) error of the central difference
    deriv = (4 * central(h / 2) - central(h)) / 3
    return 1j * deriv


def flip_amplitude(model, n, m, t):
    """Flip amplitude Phi_nm(t) = i <n_t|d/dt m_t> = i <n_t|dH/dt|m_t> / (E_m - E_n).

    Uses the model's closed form when available, otherwise a centred finite
    difference of the instantaneous eigenstates (one Richardson step).

    Raises
    ------
    DegenerateLevelsError
        if |E_m - E_n| falls below the crossing tolerance at ``t``.
    """
    n, m = as_state(n), as_state(m)
    if n == m:
        raise ValueError("flip amplitude is defined for n != m only")
    gap = np.abs(np.asarray(model.energy(m, t)) - np.asarray(model.energy(n, t)))
    if np.any(gap < CROSSING_TOL):
        where = np.ravel(t)[np.argmin(np.ravel(gap))] if np.ndim(t) else t
        raise DegenerateLevelsError(f"levels {n} and {m} cross at t={float(where):.6g}")
    try:
        return model.flip(n, m, t)
    except NotImplementedError:
        if np.ndim(t):
            return np.array([_finite_difference_flip(model, n, m, float(ti)) for ti in np.ravel(t)]).reshape(np.shape(t))
        return _finite_difference_flip(model, n, m, float(t))


def phase_dressed_flip(model, n, m, t, t_i):
    """phi_nm(t) = exp(i int_{t_i}^t Ebar_n) Phi_nm(t) exp(-i int_{t_i}^t Ebar_m)."""
    n, m = as_state(n), as_state(m)
    phase = model.dressed_phase(n, t, t_i, 0.0) - model.dressed_phase(m, t, t_i, 0.0)
    return flip_amplitude(model, n, m, t) * np.exp(1j * phase)


def shifted_flip(model, n, m, t, means, t_i=None):
    """Phi~_nm(t) = exp(-i t eps_n) phi_nm(t) exp(+i t eps_m).

    The constant gauge phase exp(-i t_i (eps_n - eps_m)) is dropped by
    referring all phase integrals to ``means.origin``.
    """
    if t_i is not None and t_i != means.origin:
        raise WindowMismatchError(f"phase origin {t_i} differs from the mean-energy origin {means.origin}")
    n, m = as_state(n), as_state(m)
    o = means.origin
    phase = model.dressed_phase(n, t, o, means[n]) - model.dressed_phase(m, t, o, means[m])
    return flip_amplitude(model, n, m, t) * np.exp(1j * phase)


# ---------------------------------------------------------------------------
# Fourier tables

@dataclass
class ContinuumCoupling:
    """Coefficients B_{n,k}(nu) between a discrete state and a continuum.

    ``nodes``/``weights`` discretise (0, k_max]; a sum over continuum states
    equals ``measure`` times the integral over k.  ``evaluate(k)`` returns the
    full nu-vector at an arbitrary momentum (needed at principal-value poles).
    Continuum energies follow the free dispersion k^2 / 2.
    """

    state: StateIndex
    nodes: np.ndarray
    weights: np.ndarray
    measure: float
    values: np.ndarray
    evaluate: Callable
    k_max: float

    @staticmethod
    def energy(k):
        return 0.5 * np.asarray(k) ** 2

    @staticmethod
    def momentum(e):
        return math.sqrt(2.0 * e)


@dataclass
class FourierTable:
    """Coefficients B_nm(nu) with the (T, omega) convention attached.

    For finite ``T`` the ``coeffs`` dict maps (n, m) to an array over
    nu = -nu_max..nu_max.  For ``T = inf`` the ``transforms`` dict maps
    (n, m) to a callable q -> B^_nm(q).  Pairs absent from the table are
    uncoupled.  ``continuum`` holds discrete-continuum blocks keyed by the
    discrete state.  ``bandwidth`` bounds the support in q of the transforms.
    """

    T: float
    omega: float
    nu_max: int | None = None
    coeffs: dict = field(default_factory=dict)
    transforms: dict = field(default_factory=dict)
    continuum: dict = field(default_factory=dict)
    model: InstantModel | None = None
    means: MeanEnergy | None = None
    bandwidth: float | None = None
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def is_transform(self):
        return math.isinf(self.T)

    @property
    def nus(self):
        return np.arange(-self.nu_max, self.nu_max + 1)

    def states(self):
        """Discrete states appearing in the table, sorted."""
        out = set(self.continuum)
        for n, m in list(self.coeffs) + list(self.transforms):
            out.update((n, m))
        return sorted(s for s in out if s.is_discrete)

    def coeff(self, n, m):
        """Array of B_nm(nu) over ``nus`` (finite-T tables)."""
        n, m = as_state(n), as_state(m)
        if (n, m) in self.coeffs:
            return self.coeffs[(n, m)]
        if (m, n) in self.coeffs:
            return np.conj(self.coeffs[(m, n)][::-1])
        if n.is_discrete and not m.is_discrete and n in self.continuum:
            return self.continuum[n].evaluate(m.value)
        if m.is_discrete and not n.is_discrete and m in self.continuum:
            return np.conj(self.continuum[m].evaluate(n.value)[::-1])
        return np.zeros(2 * self.nu_max + 1, dtype=complex)

    def transform(self, n, m):
        """Callable q -> B^_nm(q) (T = inf tables)."""
        n, m = as_state(n), as_state(m)
        if (n, m) in self.transforms:
            return self.transforms[(n, m)]
        if (m, n) in self.transforms:
            f = self.transforms[(m, n)]
            return lambda q: np.conj(f(-np.asarray(q)))
        return lambda q: np.zeros(np.shape(q), dtype=complex)

    def reconstruct(self, n, m, t):
        """Phi~_nm(t) = (2T)^(-1/2) sum_nu B_nm(nu) exp(-i w nu t)."""
        t = np.asarray(t, dtype=float)
        b = self.coeff(n, m)
        phases = np.exp(-1j * self.omega * np.multiply.outer(t, self.nus))
        return phases @ b / math.sqrt(2 * self.T)


def fourier_coefficients(model, pairs, window, nu_max, means, samples=None, tol=1e-10):
    """Fourier table of the shifted flips for the requested pairs.

    Parameters
    ----------
    model : InstantModel
    pairs : list of (n, m)
    window : (T, omega)
        Half-window and base frequency.  ``T = inf`` selects transforms.
    nu_max : int
        Keep |nu| <= nu_max (ignored for transforms).
    means : MeanEnergy
    samples : int, optional
        Fixed sample count for periodic models; adaptive doubling if None.

    Returns
    -------
    FourierTable

    Raises
    ------
    AliasingError
        if ``samples`` cannot resolve frequencies up to ``nu_max``.
    """
    T, omega = window
    pairs = [(as_state(n), as_state(m)) for n, m in pairs]
    table = FourierTable(T=T, omega=omega, nu_max=None if math.isinf(T) else int(nu_max),
                         model=model, means=means)
    if math.isinf(T):
        for n, m in pairs:
            table.transforms[(n, m)] = _transform_callable(model, n, m, means)
        return table

    nus = table.nus
    if samples is not None and samples < 2 * nu_max + 1:
        raise AliasingError(f"{samples} samples cannot resolve |nu| <= {nu_max}")
    periodic = model.period is not None and abs(2 * T / model.period - round(2 * T / model.period)) < 1e-12
    for n, m in pairs:
        def integrand(t, n=n, m=m):
            return shifted_flip(model, n, m, t, means)[..., None] * np.exp(1j * omega * np.multiply.outer(t, nus))

        if periodic:
            vals = _trapezoid_vector(integrand, -T, 2 * T, samples, max(64, 4 * nu_max), tol)
        else:
            vals = _panels_vector(integrand, -T, T, tol)
        table.coeffs[(n, m)] = vals / math.sqrt(2 * T)
    return table


def _trapezoid_vector(f, t0, length, samples, start, tol):
    if samples is not None:
        t = t0 + length * np.arange(samples) / samples
        return length * np.mean(f(t), axis=0)
    prev = None
    m = start
    while m <= 1 << 18:
        t = t0 + length * np.arange(m) / m
        val = length * np.mean(f(t), axis=0)
        if prev is not None and np.max(np.abs(val - prev)) < tol:
            return val
        prev, m = val, 2 * m
    raise AliasingError("trapezoid rule did not resolve the requested frequencies")


def _panels_vector(f, a, b, tol):
    from .quadrature import panel_nodes
    prev = None
    n = 4
    while n <= 4096:
        nodes, weights = panel_nodes(np.linspace(a, b, n + 1))
        val = np.tensordot(weights, f(nodes), axes=(0, 0))
        if prev is not None and np.max(np.abs(val - prev)) < tol:
            return val
        prev, n = val, 2 * n
    raise AliasingError("panel quadrature did not resolve the requested frequencies")


def _transform_callable(model, n, m, means):
    closed = getattr(model, "transform", None)
    if closed is not None:
        try:
            closed(n, m, 0.0)
            return lambda q: closed(n, m, q)
        except NotImplementedError:
            pass
    sup = model.support()
    if sup is None:
        raise ModeError("numerical transforms need a model with finite flip support")
    a, b = sup

    def fn(q):
        q = np.atleast_1d(np.asarray(q, dtype=float))
        out = np.array([integrate_panels(
            lambda t: shifted_flip(model, n, m, t, means) * np.exp(1j * qi * t), a, b, panels=16)
            for qi in q.ravel()]) / math.sqrt(2 * math.pi)
        return out.reshape(q.shape)

    return fn


# ---------------------------------------------------------------------------
# finite-dimensional models

class MatrixModel(InstantModel):
    """Model defined by a real symmetric matrix Hamiltonian H(t).

    Eigenstates are ordered by energy; their sign is fixed by making the
    largest component positive.  No closed-form flip is provided unless
    ``dhamiltonian`` is given, so flips default to finite differences.
    """

    def __init__(self, hamiltonian, dhamiltonian=None, period=None, scale=1.0):
        self._h = hamiltonian
        self._dh = dhamiltonian
        self.period = period
        self._scale = scale

    def time_scale(self):
        return self.period if self.period is not None else self._scale

    def _eig(self, t):
        e, v = np.linalg.eigh(np.asarray(self._h(t), dtype=float))
        idx = np.argmax(np.abs(v), axis=0)
        v = v * np.sign(v[idx, np.arange(v.shape[1])])
        return e, v

    def energy(self, n, t):
        n = as_state(n)
        if np.ndim(t):
            return np.array([self._eig(ti)[0][n.value] for ti in np.ravel(t)]).reshape(np.shape(t))
        return self._eig(t)[0][n.value]

    def overlap(self, n, m, t, s):
        return float(self._eig(t)[1][:, as_state(n).value] @ self._eig(s)[1][:, as_state(m).value])

    def flip(self, n, m, t):
        if self._dh is None:
            raise NotImplementedError
        n, m = as_state(n), as_state(m)

        def one(ti):
            e, v = self._eig(ti)
            num = v[:, n.value] @ np.asarray(self._dh(ti)) @ v[:, m.value]
            return 1j * num / (e[m.value] - e[n.value])

        if np.ndim(t):
            return np.array([one(ti) for ti in np.ravel(t)]).reshape(np.shape(t))
        return one(t)
