"""Driven harmonic oscillator with polychromatic Gaussian-noise driving.

H = p^2/2 + Omega^2 x^2/2 + x J(t).  In the N -> inf limit the driving
averages to J(t) = g sin(Omega t) exp(-sigma^2 t^2 / 2), whose transform is
known in closed form, so every second-order quantity is analytic while the
higher orders come from the engine's time-domain cumulants.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf, eval_genlaguerre, gammaln

from . import engine
from .errors import ModeError, ValidationError
from .spectral import FourierTable, InstantModel, MeanEnergy, as_state, discrete

SUPPORT_WIDTHS = 12.0


@dataclass(frozen=True)
class PolyDriving:
    """Polychromatic driving J(t) = (g/N) sum_j sin(w_j t), w_j ~ N(Omega, sigma^2).

    ``N_pulses = inf`` selects the averaged closed form.  ``force`` lifts the
    sigma >= 5 Omega requirement (with a warning).
    """

    g: float
    sigma: float
    Omega: float = 1.0
    N_pulses: float = math.inf
    seed: int = 0
    force: bool = False

    def __post_init__(self):
        bad = []
        if self.sigma <= 0 or self.Omega <= 0:
            bad.append("sigma and Omega must be positive")
        elif self.sigma < 5 * self.Omega:
            if self.force:
                warnings.warn("sigma/Omega below 5: the expansion parameter is no longer small", stacklevel=2)
            else:
                bad.append("sigma/Omega below 5")
        if not math.isinf(self.N_pulses) and (self.N_pulses < 1 or int(self.N_pulses) != self.N_pulses):
            bad.append("N_pulses must be a positive integer or inf")
        if bad:
            raise ValidationError(bad)

    @property
    def infinite(self):
        return math.isinf(self.N_pulses)

    def frequencies(self):
        """Seeded sample of the N driving frequencies (finite mode only)."""
        if self.infinite:
            raise ModeError("the averaged driving has no sampled frequencies")
        rng = np.random.default_rng(self.seed)
        return rng.normal(self.Omega, self.sigma, int(self.N_pulses))

    def J(self, t):
        t = np.asarray(t, dtype=float)
        if self.infinite:
            return self.g * np.sin(self.Omega * t) * np.exp(-0.5 * (self.sigma * t) ** 2)
        w = self.frequencies()
        return self.g * np.mean(np.sin(np.multiply.outer(t, w)), axis=-1)

    def J_dot(self, t):
        t = np.asarray(t, dtype=float)
        if self.infinite:
            s, o = self.sigma, self.Omega
            return self.g * (o * np.cos(o * t) - s * s * t * np.sin(o * t)) * np.exp(-0.5 * (s * t) ** 2)
        w = self.frequencies()
        return self.g * np.mean(w * np.cos(np.multiply.outer(t, w)), axis=-1)


def j_tilde(driving, k):
    """Transform (2 pi)^(-1/2) int J(t) exp(i k t) dt of the averaged driving."""
    if not driving.infinite:
        raise ModeError("closed-form transform needs N_pulses = inf; use j_tilde_sampled")
    k = np.asarray(k, dtype=float)
    s, o = driving.sigma, driving.Omega
    return driving.g / (2j * s) * (np.exp(-(k + o) ** 2 / (2 * s * s)) - np.exp(-(k - o) ** 2 / (2 * s * s)))


def j_tilde_sampled(driving, k, window):
    """Gaussian-windowed transform of a finite-N driving.

    Each pulse contributes (L/2i)[exp(-L^2 (k + w)^2 / 2) - exp(-L^2 (k - w)^2 / 2)]
    for the window exp(-t^2 / 2 L^2).  Returns the mean over pulses (times g)
    and its Monte-Carlo standard error.
    """
    if driving.infinite:
        raise ModeError("sampling needs a finite N_pulses")
    w = driving.frequencies()
    k = np.atleast_1d(np.asarray(k, dtype=float))
    L = window
    terms = L / 2j * (np.exp(-0.5 * L * L * np.add.outer(k, w) ** 2) - np.exp(-0.5 * L * L * np.subtract.outer(k, w) ** 2))
    mean = driving.g * terms.mean(axis=1)
    err = driving.g * np.abs(terms).std(axis=1, ddof=1) / math.sqrt(len(w))
    return mean, err


def alpha_parameter(driving):
    """Expansion parameter a = sqrt(pi / Omega) |J~(Omega)|."""
    return float(math.sqrt(math.pi / driving.Omega) * abs(j_tilde(driving, driving.Omega)))


def coupling_for_alpha(a, sigma, Omega=1.0):
    """Driving strength g giving expansion parameter ``a``."""
    return 2 * sigma * a / (math.sqrt(math.pi / Omega) * (1 - math.exp(-2 * Omega ** 2 / sigma ** 2)))


def driving_for_alpha(a, sigma=5.0, Omega=1.0, force=False):
    return PolyDriving(g=coupling_for_alpha(a, sigma, Omega), sigma=sigma, Omega=Omega, force=force)


def f_polynomial(n, a2):
    """Survival polynomial 1 - 2 n a^2 + (n/2)(3n - 1) a^4 (fourth order)."""
    return 1 - 2 * n * a2 + 0.5 * n * (3 * n - 1) * a2 * a2


def _ladder(n, m, Omega):
    """A_nm with Phi_nm = i A_nm dJ/dt."""
    c = 1.0 / (Omega * math.sqrt(2 * Omega))
    if n == m - 1:
        return c * math.sqrt(n + 1)
    if n == m + 1:
        return -c * math.sqrt(n)
    return 0.0


def displaced_overlap(n, m, alpha):
    """<n|D(alpha)|m> for real alpha (Laguerre form)."""
    if n >= m:
        lead = math.exp(0.5 * (gammaln(m + 1) - gammaln(n + 1)))
        return lead * alpha ** (n - m) * math.exp(-0.5 * alpha * alpha) * eval_genlaguerre(m, n - m, alpha * alpha)
    return (-1) ** (m - n) * displaced_overlap(m, n, alpha)


class DhoModel(InstantModel):
    """Instantaneous spectrum of the driven oscillator.

    E_n(t) = Omega (n + 1/2) - J^2 / (2 Omega^2); the eigenstates are number
    states displaced to x0(t) = -J / Omega^2.
    """

    def __init__(self, driving):
        self.driving = driving
        self.Omega = driving.Omega

    def time_scale(self):
        return 1.0 / self.driving.sigma

    def support(self):
        if not self.driving.infinite:
            return None
        w = SUPPORT_WIDTHS / self.driving.sigma
        return (-w, w)

    def energy(self, n, t):
        n = as_state(n)
        return self.Omega * (n.value + 0.5) - self.driving.J(t) ** 2 / (2 * self.Omega ** 2)

    def flip(self, n, m, t):
        a = _ladder(as_state(n).value, as_state(m).value, self.Omega)
        if a == 0.0:
            return np.zeros(np.shape(t), dtype=complex)
        return 1j * a * self.driving.J_dot(t)

    def overlap(self, n, m, t, s):
        o = self.Omega
        x_t, x_s = -self.driving.J(t) / o ** 2, -self.driving.J(s) / o ** 2
        return displaced_overlap(as_state(n).value, as_state(m).value, math.sqrt(o / 2) * float(x_s - x_t))

    def _j2_integral(self, t):
        # int_0^t J^2 for the averaged driving
        d = self.driving
        s, o = d.sigma, d.Omega
        t = np.asarray(t, dtype=float)
        plain = math.sqrt(math.pi) / (2 * s) * erf(s * t)
        shift = 1j * o / s
        osc = (math.sqrt(math.pi) / (2 * s) * math.exp(-(o / s) ** 2)
               * (erf(s * t - shift) - erf(-shift))).real
        return 0.5 * d.g ** 2 * (plain - osc)

    def phase_integral(self, n, ta, tb):
        n = as_state(n)
        if not self.driving.infinite:
            return super().phase_integral(n, ta, tb)
        return self.Omega * (n.value + 0.5) * (tb - ta) - (self._j2_integral(tb) - self._j2_integral(ta)) / (2 * self.Omega ** 2)

    def mean_energy(self, n, window):
        ta, tb = window
        if math.isinf(ta) and math.isinf(tb):
            # J^2 is integrable, so it averages out over the infinite window
            return self.Omega * (as_state(n).value + 0.5)
        return super().mean_energy(n, window)

    def dressed_phase(self, n, t, origin, eps):
        if not self.driving.infinite:
            return super().dressed_phase(n, t, origin, eps)
        t = np.asarray(t, dtype=float)
        n = as_state(n)
        return ((self.Omega * (n.value + 0.5) - eps) * (t - origin)
                - (self._j2_integral(t) - self._j2_integral(origin)) / (2 * self.Omega ** 2))

    def transform(self, n, m, q):
        """B^_nm(q) = A_nm q J~(q) (closed form, T = inf)."""
        a = _ladder(as_state(n).value, as_state(m).value, self.Omega)
        q = np.asarray(q, dtype=float)
        return a * q * j_tilde(self.driving, q)

    def table(self, n_max):
        """Transform table and mean energies for states 0..n_max."""
        if not self.driving.infinite:
            raise ModeError("transform tables need N_pulses = inf")
        states = [discrete(i) for i in range(n_max + 1)]
        means = MeanEnergy({s: self.Omega * (s.value + 0.5) for s in states}, (-math.inf, math.inf))
        tab = FourierTable(T=math.inf, omega=0.0, model=self, means=means,
                           bandwidth=self.Omega + SUPPORT_WIDTHS * self.driving.sigma)
        for i in range(n_max):
            a, b = states[i], states[i + 1]
            tab.transforms[(a, b)] = (lambda q, a=a, b=b: self.transform(a, b, q))
            tab.transforms[(b, a)] = (lambda q, a=a, b=b: self.transform(b, a, q))
        return tab, means


# ---------------------------------------------------------------------------
# probabilities

@dataclass
class DhoResult:
    """Transition probabilities per method for one value of a."""

    a: float
    P: dict = field(default_factory=dict)
    f_values: dict = field(default_factory=dict)


def probabilities_exact(a, pairs):
    """Forced-oscillator probabilities e^-x (m!/n!) x^(n-m) [L_m^(n-m)(x)]^2, x = a^2."""
    return {(n, m): displaced_overlap(n, m, a) ** 2 for n, m in pairs}


def _order_cap(n, m):
    return max(4, 2 * abs(n - m))


def _truncated_square(coeffs, cap):
    """sum_{r + r' <= cap} c_r conj(c_r'), the order-truncated |sum c_r|^2."""
    total = 0.0
    for r, c in coeffs.items():
        for s, d in coeffs.items():
            if r + s <= cap:
                total += (c * np.conj(d)).real
    return float(total)


def _n_max(pairs, r_max):
    top = max(max(n, m) for n, m in pairs)
    return top + r_max // 2 + 2


def probabilities_gppa(driving, pairs, r_max=4, points=engine.TIME_POINTS):
    """GPPA probabilities with the ground-state damping factored out.

    Diagonal: P_nn = e^(-a^2) f(n), with f the fourth-order expansion of
    exp(-2 Im 2T gamma_n + a^2) built from the engine's gamma orders.
    Off-diagonal: P_nm = exp(-2 Im 2T gamma_0) T[|sum_r S^(r)|^2] where S is
    the loop-factorized series and T keeps orders up to max(4, 2|n - m|).
    """
    model = DhoModel(driving)
    series_r = max(r_max, max(n + m + 2 for n, m in pairs))
    tab, means = model.table(_n_max(pairs, series_r))
    g0 = engine.gamma_total(model, 0, tab, means, r_max=r_max, points=points)
    damp = math.exp(-2 * g0.value.imag)
    x = 2 * g0.by_order[2].imag
    out, f_vals = {}, {}
    for n, m in pairs:
        if n == m:
            gn = engine.gamma_total(model, n, tab, means, r_max=r_max, points=points)
            y1 = -2 * gn.by_order[2].imag + x
            y2 = -2 * sum(gn.by_order[r].imag for r in range(3, r_max + 1))
            f = 1 + y1 + y2 + 0.5 * y1 * y1
            f_vals[n] = f
            out[(n, m)] = damp * f
        else:
            ser = engine.renormalized_series(model, n, m, tab, means, r_max=n + m + 2, points=points)
            s = {r: v / ser.factor for r, v in ser.terms.items() if v != 0}
            out[(n, m)] = damp * _truncated_square(s, _order_cap(n, m))
    return out, f_vals


def probabilities_apt4(driving, pairs, points=engine.TIME_POINTS):
    """Bare adiabatic perturbation theory: T[|sum_r X^(r)|^2] from the Dyson series."""
    model = DhoModel(driving)
    cap = max(_order_cap(n, m) for n, m in pairs)
    tab, means = model.table(_n_max(pairs, cap))
    states = tab.states()
    grid = engine.ChebyshevGrid(*model.support(), points)
    phi = engine.dressed_flip_matrix(model, states, means, grid.t)
    out = {}
    cache = {}
    for n, m in pairs:
        c = _order_cap(n, m)
        if m not in cache:
            cache[m] = engine.dyson_orders(phi, grid, m, cap)
        x = {r: cache[m][r][n] for r in range(c + 1)}
        out[(n, m)] = _truncated_square(x, c)
    return out


def dho_probabilities(a, pairs, sigma=5.0, Omega=1.0, points=engine.TIME_POINTS, force=False):
    """All three probability sets at expansion parameter ``a``."""
    if a > 0:
        driving = driving_for_alpha(a, sigma, Omega, force)
    else:
        driving = PolyDriving(0.0, sigma, Omega, force=force)
    res = DhoResult(a=a)
    if a == 0:
        delta = {(n, m): float(n == m) for n, m in pairs}
        res.P = {"gppa": dict(delta), "apt4": dict(delta), "exact": dict(delta)}
        res.f_values = {n: 1.0 for n, m in pairs if n == m}
        return res
    gppa, f_vals = probabilities_gppa(driving, pairs, points=points)
    res.P = {"gppa": gppa, "apt4": probabilities_apt4(driving, pairs, points=points),
             "exact": probabilities_exact(alpha_parameter(driving), pairs)}
    res.f_values = f_vals
    return res
