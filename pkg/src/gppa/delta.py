"""Periodically driven delta barrier H = p^2/2 - g0 sin(t) delta(x).

While sin t > 0 the potential binds a single state
psi_0 = sqrt(kappa) exp(-kappa |x|), kappa = g0 sin t, E_0 = -kappa^2 / 2.
Scattering states of even parity, cos(k|x| + d_k) / sqrt(2 pi) with
tan d_k = kappa / k, couple to it; odd states never feel the barrier.  With
this normalisation a sum over continuum states is 2 int dk.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .errors import NoFixedPointError, ValidationError
from .quadrature import gl_rule
from .spectral import (ContinuumCoupling, FourierTable, InstantModel, MeanEnergy,
                       as_state, continuum, discrete, shifted_flip)

BOUND = discrete(0)
SQRT_2PI = math.sqrt(2 * math.pi)


@dataclass(frozen=True)
class DeltaConfig:
    """Delta-barrier run parameters (k grid: Gauss-Legendre on (0, k_max])."""

    g0: float = 1.0
    k_max: float = 12.0
    n_k: int = 400
    nu_max: int = 8
    N: int = 50
    margin: float = 1.0
    window: float = 3.0
    third_term: bool = False
    excision: float = 1e-2

    def violations(self):
        out = []
        if not self.g0 >= 0:
            out.append("g0 must be non-negative")
        if self.nu_max < 1:
            out.append("nu_max must be at least 1")
        if self.n_k < 2:
            out.append("n_k must be at least 2")
        if self.N < 1:
            out.append("N must be a positive integer")
        eps0 = -self.g0 ** 2 / 4
        if self.k_max ** 2 / 2 < eps0 + self.nu_max + self.margin:
            out.append("k_max too small: open channels up to nu_max are not representable")
        return out

    def check(self):
        bad = self.violations()
        if bad:
            raise ValidationError(bad)
        return self

    def k_grid(self):
        x, w = gl_rule(self.n_k)
        return 0.5 * self.k_max * (x + 1), 0.5 * self.k_max * w


@dataclass
class TransmissionProfile:
    """Samples (eps, value) of a transmission measure."""

    samples: list
    source: str
    params: dict = field(default_factory=dict)

    @property
    def energies(self):
        return np.array([e for e, _ in self.samples])

    @property
    def values(self):
        return np.array([v for _, v in self.samples])

    def minimum(self):
        i = int(np.argmin(self.values))
        return self.samples[i]


@dataclass
class ResonanceReport:
    n: int
    eps_res: float
    re_de: float
    im_de: float
    gamma_k: complex
    k: float
    iterations: int
    tkk: float
    channel_terms: dict = field(default_factory=dict)
    Tkk_profile: TransmissionProfile | None = None


class DeltaModel(InstantModel):
    """Instantaneous spectrum of the driven delta barrier (omega = 1)."""

    period = 2 * math.pi

    def __init__(self, g0):
        self.g0 = g0

    def kappa(self, t):
        return self.g0 * np.sin(t)

    def kappa_dot(self, t):
        return self.g0 * np.cos(t)

    def bound_present(self, t):
        return np.sin(t) > 0

    def energy(self, n, t):
        n = as_state(n)
        t = np.asarray(t, dtype=float)
        if n.is_discrete:
            # the bound level is represented by the threshold 0 while absent
            return np.where(self.bound_present(t), -0.5 * self.kappa(t) ** 2, 0.0)
        return np.full(np.shape(t), 0.5 * n.value ** 2)

    def _psi_at_origin(self, k, t):
        # cos d_k / sqrt(2 pi) with tan d_k = kappa / k
        kap = self.kappa(t)
        return k / np.sqrt(k * k + kap * kap) / SQRT_2PI

    def flip(self, n, m, t):
        n, m = as_state(n), as_state(m)
        t = np.asarray(t, dtype=float)
        kd = self.kappa_dot(t)
        if n.is_discrete or m.is_discrete:
            k = (m if n.is_discrete else n).value
            on = self.bound_present(t)
            kap = np.where(on, self.kappa(t), 0.0)
            val = -2j * kd * np.sqrt(kap) * k / (SQRT_2PI * (k * k + kap * kap) ** 1.5)
            val = np.where(on, val, 0.0)
            # Phi_k0 = conj(Phi_0k); Phi_0k is purely imaginary
            return val if n.is_discrete else -val
        k1, k2 = n.value, m.value
        num = -1j * kd * self._psi_at_origin(k1, t) * self._psi_at_origin(k2, t)
        return num / (0.5 * (k2 * k2 - k1 * k1))

    def overlap(self, n, m, t, s):
        """<0_t|k_s> from the closed-form x integral (bound at t, even state at s)."""
        n, m = as_state(n), as_state(m)
        if not (n.is_discrete and not m.is_discrete):
            raise NotImplementedError
        k = m.value
        if not self.bound_present(t):
            return 0.0
        kt, ks = float(self.kappa(t)), float(self.kappa(s))
        d = math.atan2(ks, k)
        return 2 * math.sqrt(kt) / SQRT_2PI * (kt * math.cos(d) - k * math.sin(d)) / (kt * kt + k * k)

    def mean_energy(self, n, window):
        n = as_state(n)
        if n.is_discrete:
            # average of -kappa^2/2 over the attractive half period
            return -self.g0 ** 2 / 4
        return 0.5 * n.value ** 2

    def phase_integral(self, n, ta, tb):
        return float(self.dressed_phase(n, tb, ta, 0.0))

    def dressed_phase(self, n, t, origin, eps):
        n = as_state(n)
        t = np.asarray(t, dtype=float)
        if not n.is_discrete:
            return (0.5 * n.value ** 2 - eps) * (t - origin)

        def prim(x):
            return -self.g0 ** 2 * (0.5 * x - 0.25 * np.sin(2 * x)) / 2

        return prim(t) - prim(origin) - eps * (t - origin)

    def means(self):
        return MeanEnergy({BOUND: -self.g0 ** 2 / 4}, (0.0, math.pi), 0.0)


def instantaneous_spectrum(g0, t):
    """Bound energy (None if absent) and the model at time ``t``."""
    model = DeltaModel(g0)
    e0 = float(model.energy(BOUND, t)) if model.bound_present(t) else None
    return {"bound_energy": e0, "kappa": float(model.kappa(t)), "model": model}


def _tau_nodes(k, order=24):
    """Quadrature on (0, pi) graded towards both ends in u = sqrt(tau).

    The bound-continuum flip behaves like sqrt(tau) k / (k^2 + tau^2)^(3/2)
    near the ends, which has structure on the scale tau ~ k.
    """
    x, w = gl_rule(order)
    um = math.sqrt(math.pi / 2)
    edges = [0.0]
    s = math.sqrt(k) / 64
    while s < um:
        edges.append(s)
        s *= 2
    edges.append(um)
    edges = np.array(edges)
    lo, hi = edges[:-1], edges[1:]
    u = (0.5 * (hi - lo)[:, None] * (x[None, :] + 1) + lo[:, None]).ravel()
    wu = (0.5 * (hi - lo)[:, None] * w[None, :]).ravel()
    tau, wt = u * u, 2 * u * wu
    return np.concatenate([tau, math.pi - tau[::-1]]), np.concatenate([wt, wt[::-1]])


def bound_coefficients(model, k, nus, means, conjugate=False):
    """B_0k(nu) over the attractive window (0, pi); B_k0 if ``conjugate``."""
    tau, w = _tau_nodes(k)
    a, b = (continuum(k), BOUND) if conjugate else (BOUND, continuum(k))
    f = shifted_flip(model, a, b, tau, means)
    phases = np.exp(1j * np.multiply.outer(tau, nus))
    return (w * f) @ phases / SQRT_2PI


def b_coefficients(cfg):
    """Fourier table of the bound-continuum couplings on the configured k grid."""
    cfg.check()
    model = DeltaModel(cfg.g0)
    means = model.means()
    table = FourierTable(T=math.pi, omega=1.0, nu_max=cfg.nu_max, model=model, means=means)
    nus = table.nus
    k, wk = cfg.k_grid()
    values = np.array([bound_coefficients(model, kk, nus, means) for kk in k])
    cache = {}

    def evaluate(kk):
        kk = float(kk)
        if kk not in cache:
            cache[kk] = bound_coefficients(model, kk, nus, means)
        return cache[kk]

    table.continuum[BOUND] = ContinuumCoupling(BOUND, k, wk, 2.0, values, evaluate, cfg.k_max)
    return table, model, means


def _gamma_k(model, table, means, eps, window):
    k = math.sqrt(2 * eps)
    return engine.gamma_resummed(model, continuum(k), table, means, window=window), k


def resonance_locate(cfg, n=1, table=None, damping=0.5, tol=1e-10, max_iter=100):
    """Solve eps = eps_0 + n - Re delta eps_0k(n)(eps).

    The sign makes the real part of the resonant denominator
    eps_0 - eps_k - delta eps + n vanish at the fixed point.  Starting from
    eps_0 + n and one undamped step, the iteration takes secant steps on the
    residual and falls back to a damped step whenever the secant step would
    leave the open-channel region or fails to reduce the residual.
    """
    if n < 1:
        raise ValidationError("the sideband index n must be a strictly positive integer")
    if cfg.g0 <= 0:
        raise ValidationError("g0 must be positive to bind a state")
    if table is None:
        table, model, means = b_coefficients(cfg)
    else:
        model, means = table.model, table.means
    eps0 = means[BOUND]
    if eps0 + n <= 0:
        raise NoFixedPointError("the resonant channel is closed for this g0")

    def residual(e):
        de = engine.energy_correction(model, BOUND, continuum(math.sqrt(2 * e)), n, table, means)
        return e - (eps0 + n - de.real)

    e_prev = eps0 + n
    f_prev = residual(e_prev)
    eps = e_prev - f_prev
    for it in range(1, max_iter + 1):
        if not (eps > 0 and math.isfinite(eps)):
            raise NoFixedPointError(f"iteration left the open-channel region at step {it}")
        f = residual(eps)
        if abs(f) < tol:
            break
        step = eps - damping * f
        if f != f_prev:
            secant = eps - f * (eps - e_prev) / (f - f_prev)
            if secant > 0 and abs(secant - eps) <= 4 * abs(f):
                step = secant
        e_prev, f_prev, eps = eps, f, step
    else:
        raise NoFixedPointError(f"no fixed point after {max_iter} iterations")
    k = math.sqrt(2 * eps)
    de = engine.energy_correction(model, BOUND, continuum(k), n, table, means)
    gamma, _ = _gamma_k(model, table, means, eps, cfg.window)
    tkk = math.exp(-2 * math.pi * cfg.N * gamma.value.imag)
    return ResonanceReport(n=n, eps_res=eps, re_de=de.real, im_de=de.imag, gamma_k=gamma.value, k=k,
                           iterations=it, tkk=tkk, channel_terms=im_de_channels(table, eps, n))


def im_de_channels(table, eps, n):
    """Per-nu2 contributions |B_0k'(nu2)|^2 / k' to Im delta eps_0k(n)."""
    block = table.continuum[BOUND]
    out = {}
    for j, nu in enumerate(table.nus):
        c = eps - n - nu
        if c > 0:
            kp = math.sqrt(2 * c)
            out[int(nu)] = abs(block.evaluate(kp)[j]) ** 2 / kp
    return out


def transmission_ratio(cfg, eps_grid, table=None, threads=1):
    """|T_kk| = exp(-2 pi N Im(gamma_k - gamma_k^[0])) on ``eps_grid``.

    Only flips through the bound state enter gamma_k - gamma_k^[0]; the
    continuum-continuum part belongs to gamma_k^[0] and cancels.  With
    ``cfg.third_term`` the bound-state term is dropped and the excised
    continuum-continuum term is used instead (diagnostic).
    """
    if table is None:
        table, model, means = b_coefficients(cfg)
    else:
        model, means = table.model, table.means

    def one(e):
        if e <= 0:
            raise ValidationError(f"energy {e} is not an open channel")
        if cfg.third_term:
            g = continuum_term(cfg, e, cfg.excision)
        else:
            g = _gamma_k(model, table, means, e, cfg.window)[0].value
        return (float(e), float(math.exp(-2 * math.pi * cfg.N * g.imag)))

    eps_grid = [float(e) for e in eps_grid]
    if threads == 1:
        samples = [one(e) for e in eps_grid]
    else:
        with ThreadPoolExecutor(max_workers=threads or None) as pool:
            samples = list(pool.map(one, eps_grid))
    return TransmissionProfile(samples, "GPPA_ratio", params=cfg.__dict__.copy())


def first_term(table, eps, n):
    """Resonant (bound-state) term of gamma_k with the dressed denominator."""
    model, means = table.model, table.means
    k = math.sqrt(2 * eps)
    j = int(np.where(table.nus == -n)[0][0])
    b = table.continuum[BOUND].evaluate(k)[j]
    de = engine.energy_correction(model, BOUND, continuum(k), n, table, means)
    den = means[BOUND] - eps - de + n
    return abs(b) ** 2 / den / (2 * math.pi)


def continuum_coefficients(model, k, qs, nus, samples=64):
    """B_kq(nu) over the full period; the even-even flip is smooth and periodic."""
    tau = -math.pi + 2 * math.pi * np.arange(samples) / samples
    phases = np.exp(1j * np.multiply.outer(tau, nus))
    out = np.empty((len(qs), len(nus)), dtype=complex)
    for i, q in enumerate(qs):
        f = model.flip(continuum(k), continuum(q), tau)
        out[i] = (2 * math.pi / samples) * f @ phases / SQRT_2PI
    return out


def continuum_term(cfg, eps, excision=1e-2, n_k=400):
    """Continuum-continuum contribution to gamma_k (diagnostic only).

    (1/pi) sum_{nu != 0} int dk' |B_kk'(nu)|^2 / (eps_k' - eps_k + nu - i0).
    B_kk' carries a 1/(k - k') factor, so each term has a double pole at
    k' = k.  The window |k' - k| < excision is cut out; the 1/excision parts
    of nu and -nu cancel, so the sum settles as the window shrinks.  B_kk'(0)
    vanishes (its integrand is a total derivative over the period), so the
    nu = 0 term is dropped.
    """
    model = DeltaModel(cfg.g0)
    k = math.sqrt(2 * eps)
    if not 0 < excision < min(k, cfg.k_max - k):
        raise ValidationError("excision window must fit inside (0, k_max)")
    x, w = gl_rule(n_k // 2)
    lo = (0.0, k - excision)
    hi = (k + excision, cfg.k_max)
    nodes = np.concatenate([0.5 * (b - a) * (x + 1) + a for a, b in (lo, hi)])
    weights = np.concatenate([0.5 * (b - a) * w for a, b in (lo, hi)])
    nus = np.arange(-cfg.nu_max, cfg.nu_max + 1)
    values = continuum_coefficients(model, k, nodes, nus)
    block = ContinuumCoupling(continuum(k), nodes, weights, 2.0, values,
                              lambda q: continuum_coefficients(model, k, [q], nus)[0], cfg.k_max)
    idx = [j for j, nu in enumerate(nus) if nu != 0 and abs(math.sqrt(max(k * k - 2 * nu, 0)) - k) > excision]
    c = [eps - nus[j] for j in idx]
    return engine.continuum_sum(block, idx, c, 1.0 / (2 * math.pi))
