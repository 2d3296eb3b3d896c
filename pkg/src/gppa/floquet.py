"""Sideband (Floquet) scattering off the driven delta barrier.

Channel n carries energy eps + n and momentum k_n = sqrt(2 (eps + n)), taken
as i sqrt(2 |eps + n|) for closed channels so their amplitudes decay.  For a
wave incident in channel 0 the wavefunction is

    x < 0:  delta_n0 exp(i k_0 x) + r_n exp(-i k_n x)
    x > 0:  t_n exp(i k_n x)

and continuity plus the derivative jump at the barrier couple neighbouring
sidebands through g0.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .delta import TransmissionProfile
from .errors import ConvergenceError, SingularSystemError, ValidationError

THRESHOLD_TOL = 1e-12
RESIDUAL_TOL = 1e-10


@dataclass
class SidebandSystem:
    eps: float
    g0: float
    n_side: int
    static: bool = False

    @property
    def channels(self):
        return np.arange(-self.n_side, self.n_side + 1)

    def momenta(self):
        e = self.eps + self.channels
        # static channels decouple, so only the incident one can be singular
        check = e[self.n_side:self.n_side + 1] if self.static else e
        if np.any(np.abs(check) < THRESHOLD_TOL):
            raise SingularSystemError("a sideband sits exactly at its threshold")
        return np.where(e > 0, np.sqrt(np.abs(2 * e)) + 0j, 1j * np.sqrt(np.abs(2 * e)))

    def matrix(self, incident=0):
        """Linear system for (t_n, r_n) stacked as [t..., r...].

        Rows 0..N-1 impose continuity, rows N..2N-1 the derivative jump
        psi_n'(0+) - psi_n'(0-) = i g0 (psi_{n+1}(0) - psi_{n-1}(0)), or
        -2 g0 psi_n(0) for a static barrier of strength g0.  The wave comes
        in through channel ``incident`` (0 is the channel at energy eps).
        """
        k = self.momenta()
        size = len(k)
        a = np.zeros((2 * size, 2 * size), dtype=complex)
        rhs = np.zeros(2 * size, dtype=complex)
        c = self.n_side + incident
        if not (0 <= c < size) or k[c].imag != 0:
            raise ValidationError("the incident channel must be open and inside the truncation")
        k0 = k[c]
        for i in range(size):
            # continuity: t_n - r_n = delta_{n, incident}
            a[i, i] = 1.0
            a[i, size + i] = -1.0
            a[size + i, i] = 1j * k[i]
            a[size + i, size + i] = 1j * k[i]
            if self.static:
                a[size + i, i] += 2 * self.g0
            else:
                for j, s in ((i + 1, -1.0), (i - 1, 1.0)):
                    if 0 <= j < size:
                        a[size + i, j] += s * 1j * self.g0
        rhs[c] = 1.0
        rhs[size + c] = 1j * k0
        return a, rhs

    def solve(self, incident=0):
        a, rhs = self.matrix(incident)
        try:
            x = np.linalg.solve(a, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(str(exc)) from exc
        res = np.linalg.norm(a @ x - rhs) / max(np.linalg.norm(rhs), 1.0)
        if not np.isfinite(res) or res > RESIDUAL_TOL:
            raise SingularSystemError(f"solve residual {res:.3g} exceeds {RESIDUAL_TOL:g}")
        size = len(self.channels)
        return SidebandSolution(self, x[:size], x[size:], res, incident)


@dataclass
class SidebandSolution:
    """Transmitted ``t`` and reflected ``r`` amplitudes per channel.

    Channels are indexed -n_side..n_side relative to the base energy eps.
    """

    system: SidebandSystem
    t: np.ndarray
    r: np.ndarray
    residual: float
    incident: int = 0

    @property
    def elastic(self):
        return self.t[self.system.n_side + self.incident]

    def scattering(self, m):
        """Flux-normalised transmission sqrt(k_m / k_in) t_m into channel m."""
        k = self.system.momenta()
        c = self.system.n_side
        return math.sqrt(k[c + m].real / k[c + self.incident].real) * self.t[c + m]

    def flux(self):
        k = self.system.momenta()
        open_ = np.abs(k.imag) < 1e-300
        k0 = k[self.system.n_side + self.incident].real
        w = (k.real / k0)[open_]
        return float(np.sum(w * (np.abs(self.t[open_]) ** 2 + np.abs(self.r[open_]) ** 2)))


def solve_sidebands(eps, g0, n_side=None, static=False, tol=1e-8, max_side=512, incident=0):
    """Solve the truncated sideband system, doubling it until |t_0| settles.

    Without ``n_side`` the truncation starts at 12 and doubles until the
    elastic amplitude changes by less than ``tol``.
    """
    if not eps > 0:
        raise ValidationError("the incident channel must be open (eps > 0)")
    if n_side is not None:
        if n_side < 2:
            raise ValidationError("n_side must be at least 2")
        return SidebandSystem(eps, g0, int(n_side), static).solve(incident)
    n = 12
    prev = SidebandSystem(eps, g0, n, static).solve(incident)
    while n < max_side:
        n *= 2
        cur = SidebandSystem(eps, g0, n, static).solve(incident)
        if abs(cur.elastic - prev.elastic) < tol:
            return cur
        prev = cur
    raise ConvergenceError(f"sideband truncation did not converge by n_side={max_side}")


def elastic_profile(g0, eps_grid, n_side=None, threads=1):
    """|t_0|^2 over ``eps_grid``."""

    def one(e):
        return (float(e), float(abs(solve_sidebands(e, g0, n_side).elastic) ** 2))

    eps_grid = [float(e) for e in eps_grid]
    if threads == 1:
        samples = [one(e) for e in eps_grid]
    else:
        with ThreadPoolExecutor(max_workers=threads or None) as pool:
            samples = list(pool.map(one, eps_grid))
    return TransmissionProfile(samples, "Floquet_elastic", params={"g0": g0, "n_side": n_side})


def reciprocity_gap(eps, g0, m, n_side=32):
    """| |S_{m<-0}| - |S_{0<-m}| | for open channels 0 and m.

    The drive sin t is invariant under t -> pi - t, so time reversal maps
    the process 0 -> m onto m -> 0 and the flux-normalised moduli agree.
    """
    a = solve_sidebands(eps, g0, n_side, incident=0)
    b = solve_sidebands(eps, g0, n_side, incident=m)
    return abs(abs(a.scattering(m)) - abs(b.scattering(0)))
