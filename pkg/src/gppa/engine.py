"""Gamma factors, life-times, dressed propagators and renormalized series.

Two evaluation modes follow the Fourier table:

* finite T (periodic driving): discrete Fourier sums with the Kronecker
  constraint on the frequencies; continuum intermediates enter through the
  momentum grid of a :class:`ContinuumCoupling` block.
* T = inf: every 1/(2T) is absorbed into the stored value, i.e. a
  GammaFactor holds 2T * gamma.  The second order is evaluated in the
  energy domain (principal value plus i pi delta); higher orders come from
  the cumulant expansion of ln X_nn computed by time-ordered integration of
  the phase-dressed flips.

Denominators use the -i0 prescription, so 1/(x - i0) = PV(1/x) + i pi delta(x)
and Im gamma >= 0 corresponds to decay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridTooCoarseError, ModeError, UnresolvedPoleError
from .quadrature import ChebyshevGrid, principal_value_line  # noqa: F401  (re-exported)
from .spectral import as_state, flip_amplitude, shifted_flip

POLE_TOL = 1e-12
TIME_POINTS = 321
IM_TOL = 1e-9


@dataclass(frozen=True)
class GammaFactor:
    """Complex gamma factor of one state.

    When ``scaled`` is true (T = inf) ``value`` and ``by_order`` hold
    2T * gamma, the only finite combination in that limit.
    """

    value: complex
    by_order: dict
    state: object
    excluded: frozenset = frozenset()
    window: tuple = (math.inf, 0.0)
    scaled: bool = False
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Lifetime:
    """tau = 1 / (2 Im gamma); in units of 2T when the gamma is scaled."""

    tau: float
    gamma_im: float
    scaled: bool = False

    @property
    def infinite(self):
        return math.isinf(self.tau)


@dataclass
class AmplitudeSeries:
    """Renormalized expansion of a transition amplitude X_nm.

    ``terms`` maps the order r to X^(r)R; ``factor`` is the common damping
    factor (reference-state survival amplitude) already included in every
    term.
    """

    target: tuple
    terms: dict
    truncation_r: int
    factor: complex = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def total(self):
        return sum(self.terms.values(), 0j)

    def nonzero_orders(self):
        return [r for r, v in sorted(self.terms.items()) if v != 0]


@dataclass(frozen=True)
class PropagatorFactor:
    """Dressed propagation of ``state`` over ``interval``.

    ``phase`` is int Ebar_n over the interval and ``delta`` the constant
    exponent density of the truncated survival amplitude (gamma^[...]).
    """

    state: object
    excluded: frozenset
    delta: complex
    interval: tuple
    phase: float = 0.0


# ---------------------------------------------------------------------------
# power series helpers

def series_log(x):
    """Coefficients of ln(1 + x_1 e + x_2 e^2 + ...) given x[0] == 1."""
    n = len(x)
    out = [0j] * n
    for r in range(1, n):
        acc = x[r]
        for k in range(1, r):
            acc -= k * out[k] * x[r - k] / r
        out[r] = acc
    return out


def series_exp(y):
    """Coefficients of exp(y_1 e + y_2 e^2 + ...)."""
    n = len(y)
    out = [0j] * n
    out[0] = 1.0 + 0j
    for r in range(1, n):
        out[r] = sum(k * y[k] * out[r - k] for k in range(1, r + 1)) / r
    return out


# ---------------------------------------------------------------------------
# time-domain machinery (T = inf)

def _time_grid(model, points):
    sup = model.support()
    if sup is None:
        raise ModeError("time-domain evaluation needs a model with finite flip support")
    return ChebyshevGrid(sup[0], sup[1], points)


def dressed_flip_matrix(model, states, means, t):
    """phi_ab(t) on a grid, phases referred to ``means.origin``."""
    s = len(states)
    phi = np.zeros((s, s, len(t)), dtype=complex)
    o = means.origin
    phase = [model.dressed_phase(a, t, o, 0.0) for a in states]
    for i, a in enumerate(states):
        for j, b in enumerate(states):
            if a != b:
                phi[i, j] = flip_amplitude(model, a, b, t) * np.exp(1j * (phase[i] - phase[j]))
    return phi


def _flip_grid(model, table, means, points):
    """Time grid and phi matrix over all table states (cached on the table)."""
    key = ("phi", points, id(means))
    if key not in table.cache:
        grid = _time_grid(model, points)
        table.cache[key] = (grid, dressed_flip_matrix(model, table.states(), means, grid.t))
    return table.cache[key]


def _projected(model, table, means, keep, points):
    grid, phi = _flip_grid(model, table, means, points)
    states = table.states()
    idx = [states.index(s) for s in keep]
    return grid, phi[np.ix_(idx, idx)]


def dyson_orders(phi, grid, start, r_max):
    """Final-time amplitudes X^(r)_{a,start} for r = 0..r_max.

    psi^(r)(t) = i int^t phi(t') psi^(r-1)(t') dt' in the given basis.
    """
    s = phi.shape[0]
    psi = np.zeros((s, len(grid.t)), dtype=complex)
    psi[start] = 1.0
    out = [psi[:, -1].copy()]
    for _ in range(r_max):
        psi = 1j * grid.cumulative(np.einsum("abt,bt->at", phi, psi))
        out.append(psi[:, -1].copy())
    return out


def _cumulant_orders(model, n, table, means, excluded, r_max, points):
    states = [s for s in table.states() if s == n or s not in excluded]
    grid, phi = _projected(model, table, means, states, points)
    i0 = states.index(n)
    x = [v[i0] for v in dyson_orders(phi, grid, i0, r_max)]
    logs = series_log(x)
    # ln X = i 2T gamma
    return {r: -1j * logs[r] for r in range(1, r_max + 1)}


def gamma2_double_time(model, n, table, means, excluded=frozenset(), points=TIME_POINTS):
    """2T gamma^(2) from the time-ordered double integral of the loops.

    Independent of the energy-domain route used by ``gamma_order``.
    """
    n = as_state(n)
    states = [s for s in table.states() if s == n or s not in excluded]
    grid, phi = _projected(model, table, means, states, points)
    i0 = states.index(n)
    total = 0j
    for j, _ in enumerate(states):
        if j == i0:
            continue
        inner = grid.cumulative(phi[j, i0])
        total += grid.integral(phi[i0, j] * inner)
    return 1j * total


# ---------------------------------------------------------------------------
# energy-domain second order and continuum sums

def _transform_second_order(n, table, means, excluded):
    if table.bandwidth is None:
        raise ModeError("transform tables need a bandwidth for principal values")
    total = 0j
    for n1 in table.states():
        if n1 == n or n1 in excluded:
            continue
        f_a, f_b = table.transform(n, n1), table.transform(n1, n)

        def numer(q, f_a=f_a, f_b=f_b):
            q = np.asarray(q, dtype=float)
            return f_a(q) * f_b(-q)

        # denominator eps_n1 - eps_n + q vanishes at q0
        q0 = means[n] - means[n1]
        span = table.bandwidth + abs(q0)
        total += principal_value_line(numer, q0, span) + 1j * math.pi * numer(q0)
    return complex(total)


def continuum_sum(block, numer_index, c_values, prefactor):
    """sum_nu prefactor * measure * int dk F_nu(k) / (k^2/2 - c_nu - i0).

    F_nu(k) = |B_{n k}(nu)|^2 at the grid column ``numer_index[nu]``.  The
    pole at k0 = sqrt(2 c) is removed by subtracting F_nu(k0) (evaluated
    exactly) times the kernel, whose principal value over (0, K) is
    (1/k0) ln|(K - k0)/(K + k0)|; the delta part gives i pi F(k0)/k0.
    """
    k, w = block.nodes, block.weights
    kmax = block.k_max
    total = 0j
    cache = {}
    for idx, c in zip(numer_index, c_values):
        f = np.abs(block.values[:, idx]) ** 2
        # a pole within rounding of k = 0 sits at a channel threshold
        if c <= POLE_TOL:
            total += np.sum(w * f / (0.5 * k * k - c))
            continue
        k0 = math.sqrt(2 * c)
        if k0 >= kmax:
            raise GridTooCoarseError(f"pole k0={k0:.4g} lies beyond the grid edge {kmax:.4g}")
        if k0 not in cache:
            cache[k0] = block.evaluate(k0)
        f0 = abs(cache[k0][idx]) ** 2
        regular = np.sum(w * (f - f0) / (0.5 * k * k - c))
        singular = f0 * math.log(abs((kmax - k0) / (kmax + k0))) / k0
        total += regular + singular + 1j * math.pi * f0 / k0
    return prefactor * block.measure * total


def _periodic_second_order(n, table, means, excluded, dress=None):
    """(1/2T) sum_{n1, nu} B_{n n1}(nu) B_{n1 n}(-nu) / (eps_n1 - eps_n + w nu - i0).

    ``dress(n1, nu, bare)`` may return an energy correction to subtract
    from a discrete denominator; it returns None when no dressing applies.
    """
    nus = table.nus
    w = table.omega
    total = 0j
    dressed = []
    for n1 in table.states():
        if n1 == n or n1 in excluded:
            continue
        b1, b2 = table.coeff(n, n1), table.coeff(n1, n)[::-1]
        for j, nu in enumerate(nus):
            num = b1[j] * b2[j]
            if num == 0:
                continue
            bare = means[n1] - means[n] + w * nu
            de = dress(n1, nu, bare) if dress is not None else None
            if de is not None:
                den = bare - de
                dressed.append((n1, int(nu)))
            else:
                den = bare
            if abs(den) < POLE_TOL:
                raise UnresolvedPoleError(f"denominator of {n}->{n1} vanishes at nu={nu}")
            total += num / den
    total /= 2 * table.T
    if n.is_discrete and n in table.continuum and n not in excluded:
        block = table.continuum[n]
        c_values = [means[n] - w * nu for nu in nus]
        total += continuum_sum(block, range(len(nus)), c_values, 1.0 / (2 * table.T))
    return complex(total), dressed


def _periodic_higher_order(n, r, table, means, excluded):
    """Literal nested sum for r >= 3 over discrete intermediates."""
    states = [s for s in table.states() if s != n and s not in excluded]
    if any(s in table.continuum for s in [n] + states):
        raise ModeError("orders r >= 3 with continuum intermediates are not supported")
    nus = table.nus
    nm = table.nu_max
    w = table.omega
    # amp[state][s + offset] holds the partial product up to partial sum s
    width = r * nm
    size = 2 * width + 1
    amp = {n: np.zeros(size, dtype=complex)}
    amp[n][width] = 1.0
    for j in range(1, r):
        new = {}
        for b in states:
            acc = np.zeros(size, dtype=complex)
            for a, va in amp.items():
                coeff = table.coeff(a, b)
                if not np.any(coeff):
                    continue
                acc += np.convolve(va, coeff)[nm:nm + size]
            s_vals = np.arange(-width, width + 1)
            den = means[b] - means[n] + w * s_vals
            live = acc != 0
            if np.any(np.abs(den[live]) < POLE_TOL):
                raise UnresolvedPoleError(f"discrete pole at order {r} through {b}")
            acc[live] /= den[live]
            new[b] = acc
        amp = new
    total = 0j
    for a, va in amp.items():
        coeff = table.coeff(a, n)
        # close the loop: nu_r = -s
        for j, nu in enumerate(nus):
            total += va[width - nu] * coeff[j]
    return complex((-1) ** r * total / (2 * table.T) ** (r / 2))


# ---------------------------------------------------------------------------
# public operations

def gamma_order(model, n, r, table, means, excluded=frozenset(), points=TIME_POINTS):
    """Single order gamma_n^(r) (2T gamma_n^(r) when T = inf).

    Parameters
    ----------
    model : InstantModel
    n : StateIndex or int
    r : int
        Order, r >= 2.
    table : FourierTable
    means : MeanEnergy
    excluded : set of StateIndex
        Intermediate states removed from all sums.
    points : int
        Time-grid size for the cumulant route (T = inf, r >= 3).

    Returns
    -------
    complex
    """
    if r < 2:
        raise ValueError("gamma orders start at r = 2")
    n = as_state(n)
    excluded = frozenset(as_state(s) for s in excluded)
    if table.is_transform:
        if r == 2:
            return _transform_second_order(n, table, means, excluded)
        return complex(_cumulant_orders(model, n, table, means, excluded, r, points)[r])
    if r == 2:
        return _periodic_second_order(n, table, means, excluded)[0]
    return _periodic_higher_order(n, r, table, means, excluded)


def gamma_total(model, n, table, means, excluded=frozenset(), r_max=4, points=TIME_POINTS):
    """Sum of gamma orders 2..r_max, each recorded in ``by_order``."""
    if r_max < 2:
        raise ValueError("r_max must be at least 2")
    n = as_state(n)
    excluded = frozenset(as_state(s) for s in excluded)
    orders = {2: gamma_order(model, n, 2, table, means, excluded)}
    if r_max >= 3:
        if table.is_transform:
            cum = _cumulant_orders(model, n, table, means, excluded, r_max, points)
            orders.update({r: complex(cum[r]) for r in range(3, r_max + 1)})
        else:
            orders.update({r: _periodic_higher_order(n, r, table, means, excluded) for r in range(3, r_max + 1)})
    value = sum(orders[r] for r in sorted(orders))
    return GammaFactor(value=complex(value), by_order=orders, state=n, excluded=excluded,
                       window=(table.T, table.omega), scaled=table.is_transform)


def energy_correction(model, n1, n, nu1, table, means):
    """delta eps_{n1 n}(nu1) to second order in B.

    (1/2T) sum_{n2 != n, nu2} B_{n1 n2}(nu2) B_{n2 n1}(-nu2)
    / (eps_n2 - eps_n + w (nu1 + nu2) - i0), continuum n2 included through
    the momentum grid of ``n1``.
    """
    n1, n = as_state(n1), as_state(n)
    if not n1.is_discrete:
        raise ValueError("the energy-correction index must be discrete")
    if table.is_transform:
        raise ModeError("energy corrections vanish for T = inf")
    nus = table.nus
    w = table.omega
    total = 0j
    for n2 in table.states():
        if n2 in (n, n1):
            continue
        b1, b2 = table.coeff(n1, n2), table.coeff(n2, n1)[::-1]
        for j, nu in enumerate(nus):
            num = b1[j] * b2[j]
            if num == 0:
                continue
            den = means[n2] - means[n] + w * (nu1 + nu)
            if abs(den) < POLE_TOL:
                raise UnresolvedPoleError(f"energy correction pole through {n2} at nu={nu}")
            total += num / den
    total /= 2 * table.T
    if n1 in table.continuum:
        block = table.continuum[n1]
        c_values = [means[n] - w * (nu1 + nu) for nu in nus]
        total += continuum_sum(block, range(len(nus)), c_values, 1.0 / (2 * table.T))
    return complex(total)


def gamma_resummed(model, n, table, means, window=3.0):
    """Leading gamma_n with the resonant denominator dressed by delta eps.

    For each discrete intermediate n1 only the sideband nu1 nearest to
    resonance (smallest |eps_n1 - eps_n + w nu1|) is a candidate, and it is
    dressed only when |bare| <= window * |delta eps_{n1 n}(nu1)|.  All other
    denominators stay bare, since dressing them would mix in terms of an
    order that is otherwise neglected; off resonance the result therefore
    equals the second order of ``gamma_total`` bit for bit.
    """
    n = as_state(n)
    if table.is_transform:
        raise ModeError("resummation is only meaningful for periodic driving")

    def dress(n1, nu, bare):
        if not n1.is_discrete:
            return None
        nearest = round((means[n] - means[n1]) / table.omega)
        if nu != nearest:
            return None
        de = energy_correction(model, n1, n, nu, table, means)
        return de if abs(bare) <= window * abs(de) else None

    value, dressed = _periodic_second_order(n, table, means, frozenset(), dress)
    return GammaFactor(value=value, by_order={2: value}, state=n, window=(table.T, table.omega),
                       meta={"dressed": dressed, "neglected": "O(B^3)"})


def survival_amplitude(gamma, t_i, t_f):
    """X_nn(t_f, t_i) = exp(i (t_f - t_i) gamma).

    For a scaled gamma (T = inf) only the full window is meaningful and the
    exponent is i * value.
    """
    if gamma.scaled:
        if not (math.isinf(t_i) and t_i < 0 and math.isinf(t_f) and t_f > 0):
            raise ModeError("a scaled gamma only describes the full window (-inf, inf)")
        z = 1j * gamma.value
    else:
        z = 1j * (t_f - t_i) * gamma.value
    # exp underflows harmlessly; guard against overflow for growing amplitudes
    z = complex(min(z.real, 700.0), z.imag)
    return complex(np.exp(z))


def lifetime(gamma, tol=IM_TOL):
    im = gamma.value.imag
    if im <= tol:
        return Lifetime(math.inf, max(im, 0.0), gamma.scaled)
    return Lifetime(1.0 / (2.0 * im), im, gamma.scaled)


def propagator_factor(model, n, excluded, delta, interval):
    """PropagatorFactor with the bare phase integral filled in."""
    ta, tb = interval
    phase = model.phase_integral(as_state(n), ta, tb) if tb > ta else 0.0
    return PropagatorFactor(as_state(n), frozenset(excluded), complex(delta), (ta, tb), float(phase))


def geometric_propagator(factor):
    """Dressed propagator i theta(t_b - t_a) exp(-i int Ebar + i dt delta).

    The sign of the bare phase is the one that makes the interaction-picture
    series consistent with exp(-i int Ebar) on the states; the loop dressing
    enters as the survival amplitude exp(i dt delta).
    """
    ta, tb = factor.interval
    if tb < ta:
        return 0j
    dt = tb - ta
    z = -1j * factor.phase + 1j * dt * factor.delta
    z = complex(min(z.real, 700.0), z.imag)
    return 1j * complex(np.exp(z))


def dyson_histories(phi, grid, start, r_max, counter=None):
    """Time histories psi^(r)(t) and their rates for r = 0..r_max.

    ``counter`` is an optional scalar rate c(t) entering at second order,
    d psi^(r)/dt = i phi psi^(r-1) - c psi^(r-2); it multiplies every
    amplitude by exp(-int c) and therefore leaves ratios untouched.
    """
    s = phi.shape[0]
    psi0 = np.zeros((s, len(grid.t)), dtype=complex)
    psi0[start] = 1.0
    psis, rates = [psi0], [np.zeros_like(psi0)]
    for r in range(1, r_max + 1):
        rate = 1j * np.einsum("abt,bt->at", phi, psis[r - 1])
        if counter is not None and r >= 2:
            rate = rate - counter * psis[r - 2]
        rates.append(rate)
        psis.append(grid.cumulative(rate))
    return psis, rates


def _ratio_series(model, n, m, ref, table, means, r_max, points):
    """Orders of S = X_nm / X_ref and the reference survival amplitude."""
    states = table.states()
    grid, phi = _flip_grid(model, table, means, points)
    i_n, i_m, i_ref = states.index(n), states.index(m), states.index(ref)
    psis, rates = dyson_histories(phi, grid, i_ref, max(r_max, 2))
    log_ref = series_log([p[i_ref, -1] for p in psis])
    factor = complex(np.exp(sum(log_ref[1:])))
    # dC2/dt with C2 = psi2 - psi1^2 / 2 on the reference component
    counter = rates[2][i_ref] - psis[1][i_ref] * rates[1][i_ref]
    ref_c, _ = dyson_histories(phi, grid, i_ref, r_max, counter)
    inv = series_exp([-c for c in series_log([p[i_ref, -1] for p in ref_c])])
    nm_c, _ = dyson_histories(phi, grid, i_m, r_max, counter)
    x_nm = [p[i_n, -1] for p in nm_c]
    return [sum(x_nm[r - p] * inv[p] for p in range(r + 1)) for r in range(r_max + 1)], factor


def renormalized_series(model, n, m, table, means, r_max=None, reference=0,
                        points=TIME_POINTS, resolve=16.0, trunc_tol=1e-6):
    """Loop-factorized series of X_nm(inf, -inf) (T = inf tables).

    The transition amplitude is written as X_00 * sum_r S^(r), where X_00 is
    the survival amplitude of the reference state and S = X_nm / X_00 is
    expanded order by order in the flips.

    The reference state's second cumulant C2(t) is removed from the
    generator before expanding (a scalar factor common to numerator and
    denominator), which keeps the large real loop phase out of the
    cancellations between orders.  Mid-window amplitudes in the adiabatic
    basis still exceed the final ones by many orders of magnitude, so each
    order is evaluated on two time grids; an order is reported as exactly
    zero unless it exceeds ``resolve`` times the difference between them.
    """
    n, m, ref = as_state(n), as_state(m), as_state(reference)
    if not table.is_transform:
        raise ModeError("the renormalized series is built for T = inf tables")
    if r_max is None:
        r_max = n.value + m.value + 2
    fine, factor = _ratio_series(model, n, m, ref, table, means, r_max, points)
    coarse, _ = _ratio_series(model, n, m, ref, table, means, r_max, (4 * points) // 5 | 1)
    terms = {}
    for r, (a, b) in enumerate(zip(fine, coarse)):
        terms[r] = complex(factor * a) if abs(a) > resolve * abs(a - b) else 0j
    series = AmplitudeSeries(target=(n, m), terms=terms, truncation_r=r_max, factor=factor,
                             meta={"noise": [abs(a - b) for a, b in zip(fine, coarse)]})
    live = series.nonzero_orders()
    if live and abs(series.total) > 0:
        last = abs(terms[live[-1]]) / abs(series.total)
        series.meta["truncation_warning"] = bool(live[-1] >= r_max - 1 and last > trunc_tol)
    return series


def skeleton_amplitude(model, path, means, points=TIME_POINTS):
    """Time-ordered flip integral along a fixed path of distinct states.

    i^r int_{t_1 < ... < t_r} phi_{p_r p_{r-1}}(t_r) ... phi_{p_1 p_0}(t_1).
    """
    path = [as_state(p) for p in path]
    grid = _time_grid(model, points)
    t = grid.t
    acc = np.ones(len(t), dtype=complex)
    o = means.origin
    for a, b in zip(path[:-1], path[1:]):
        phi = shifted_flip(model, b, a, t, means) * np.exp(1j * (means[b] - means[a]) * (t - o))
        acc = 1j * grid.cumulative(phi * acc)
    return complex(acc[-1])


def assemble_state(model, series, gamma0, t, means=None):
    """Coefficients of the evolved state on the instantaneous basis.

    Returns [(state, coefficient)] with the reference survival amplitude
    first.  Coefficients carry the bare phase exp(-i int Ebar) from the
    phase origin to ``t`` when ``means`` is given, otherwise they are the
    interaction-picture amplitudes.
    """
    x00 = complex(np.exp(1j * gamma0.value)) if gamma0.scaled else survival_amplitude(gamma0, -t, t)
    out = [(gamma0.state, x00)]
    for s in series:
        n = s.target[0]
        c = s.total
        if means is not None:
            c *= complex(np.exp(-1j * model.dressed_phase(n, t, means.origin, 0.0)))
        out.append((n, c))
    if means is not None:
        out[0] = (gamma0.state, x00 * complex(np.exp(-1j * model.dressed_phase(gamma0.state, t, means.origin, 0.0))))
    return out
