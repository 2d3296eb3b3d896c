import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gppa import delta, engine, errors, spectral
from gppa.delta import BOUND
from gppa.spectral import continuum


def test_bound_state_at_quarter_period():
    levels = delta.instantaneous_spectrum(1.3, math.pi / 2)
    assert levels["bound_energy"] == pytest.approx(-1.3 ** 2 / 2)
    assert delta.instantaneous_spectrum(1.0, -0.5)["bound_energy"] is None


def test_bound_state_solves_stationary_equation():
    # psi = sqrt(kappa) exp(-kappa |x|): -psi''/2 = E psi away from 0 and the
    # derivative jump equals -2 kappa psi(0) for the potential -kappa delta(x)
    kappa = 0.8
    x = 0.37
    psi = lambda y: math.sqrt(kappa) * math.exp(-kappa * abs(y))
    h = 1e-4
    second = (psi(x + h) - 2 * psi(x) + psi(x - h)) / h ** 2
    assert -0.5 * second == pytest.approx(-kappa ** 2 / 2 * psi(x), rel=1e-6)
    jump = (psi(h) - psi(0)) / h - (psi(0) - psi(-h)) / h
    assert jump == pytest.approx(-2 * kappa * psi(0), rel=1e-3)


@settings(max_examples=30, deadline=None)
@given(t=st.floats(0.05, math.pi - 0.05), k=st.floats(0.1, 5.0))
def test_flip_matches_overlap_derivative(t, k):
    model = delta.DeltaModel(1.0)
    closed = model.flip(BOUND, continuum(k), t)
    fd = spectral._finite_difference_flip(model, BOUND, continuum(k), t)
    assert abs(closed - fd) < 1e-7 * max(1.0, abs(closed))


def test_flip_hermiticity_and_gap():
    model = delta.DeltaModel(1.0)
    for t in (0.4, 2.0):
        a = model.flip(BOUND, continuum(1.3), t)
        b = model.flip(continuum(1.3), BOUND, t)
        assert a == pytest.approx(np.conj(b))
    assert model.flip(BOUND, continuum(1.3), -1.0) == 0
    assert model.flip(BOUND, continuum(1.3), 4.0) == 0


def test_dressed_phase_closed_form():
    model = delta.DeltaModel(1.0)
    tau = np.linspace(0, math.pi, 7)
    assert np.allclose(model.dressed_phase(BOUND, tau, 0.0, -0.25), np.sin(2 * tau) / 8)


def test_coefficient_conjugation(delta_default):
    cfg, table, model, means = delta_default
    nus = table.nus
    for k in table.continuum[BOUND].nodes[::37]:
        b0k = delta.bound_coefficients(model, k, nus, means)
        bk0 = delta.bound_coefficients(model, k, nus, means, conjugate=True)
        assert np.max(np.abs(bk0[::-1] - np.conj(b0k))) < 1e-10


def test_coefficients_against_adaptive_quadrature(delta_default):
    from scipy.integrate import quad
    cfg, table, model, means = delta_default
    k = 0.7
    for nu in (-1, 2):
        f = lambda t: spectral.shifted_flip(model, BOUND, continuum(k), t, means) * np.exp(1j * nu * t)
        re = quad(lambda t: float(np.real(f(t))), 0, math.pi, epsabs=1e-13, limit=400)[0]
        im = quad(lambda t: float(np.imag(f(t))), 0, math.pi, epsabs=1e-13, limit=400)[0]
        got = delta.bound_coefficients(model, k, np.array([nu]), means)[0]
        assert abs(got - (re + 1j * im) / math.sqrt(2 * math.pi)) < 1e-10


def test_coefficients_decay(delta_default):
    cfg, table, model, means = delta_default
    b = np.abs(table.continuum[BOUND].values)
    nus = table.nus
    assert np.all(b[:, nus == 3] < b[:, nus == 1])
    k = table.continuum[BOUND].nodes
    big = k > 1.0
    assert np.all(np.diff(b[big][:, nus == 1].ravel()) < 0)


def test_threshold_law():
    # near tau = 0 and pi the flip concentrates on tau ~ k, giving
    # B_0k(nu) ~ -(2i/pi) I (1 - (-1)^nu) / (2 sqrt(k)),  I = int_0^inf sqrt(s)/(1+s^2)^(3/2) ds
    from scipy.integrate import quad
    I = quad(lambda s: math.sqrt(s) / (1 + s * s) ** 1.5, 0, np.inf)[0]
    for g0 in (0.5, 1.0):
        model = delta.DeltaModel(g0)
        means = model.means()
        nus = np.array([-1, 1, 2, 3])
        k = 1e-5
        b = delta.bound_coefficients(model, k, nus, means) * math.sqrt(k)
        np.testing.assert_allclose(np.abs(b[[0, 1, 3]]), 2 * I / math.pi, rtol=1e-2)
        assert abs(b[2]) < 1e-2


def test_zero_coupling_table_vanishes():
    table, _, _ = delta.b_coefficients(delta.DeltaConfig(g0=0.0, n_k=20))
    assert not np.any(table.continuum[BOUND].values)


def test_config_validation():
    assert delta.DeltaConfig().violations() == []
    assert delta.DeltaConfig(nu_max=0).violations()
    assert delta.DeltaConfig(k_max=3.0).violations()
    with pytest.raises(errors.ValidationError):
        delta.DeltaConfig(g0=-1.0).check()


def test_resonance_fixed_point(delta_default, resonance):
    cfg, table, model, means = delta_default
    rep = resonance
    assert rep.im_de > 0
    # the real part of the resonant denominator vanishes at the fixed point
    assert means[BOUND] - rep.eps_res - rep.re_de + 1 == pytest.approx(0.0, abs=1e-9)
    assert rep.tkk < math.exp(-cfg.N * rep.k / 2)


def test_resonance_channel_dominance(resonance):
    terms = resonance.channel_terms
    assert sum(terms.values()) == pytest.approx(resonance.im_de, rel=1e-9)
    top = max(terms, key=terms.get)
    assert top == -1
    others = sorted(terms.values())[-2]
    # the nu = -1 channel is the largest by a factor of about six, not ten
    assert 5 < terms[-1] / others < 7


def test_resonance_shift_tracks_infrared_cutoff(resonance):
    # |B_0k(odd nu)|^2 ~ 1/k makes Re delta eps grow with the log of the
    # smallest grid momentum, so eps_res moves when the grid is refined ...
    fine = delta.resonance_locate(delta.DeltaConfig(n_k=800), 1)
    assert fine.eps_res - resonance.eps_res > 1e-3
    # ... while the relative deviation of gamma_k from i k / 2 pi, set by
    # the subleading channels, stays at about 15 %
    for rep in (resonance, fine):
        dev = abs(rep.gamma_k - 1j * rep.k / (2 * math.pi)) / (rep.k / (2 * math.pi))
        assert 0.1 < dev < 0.2


def test_small_coupling_resonance():
    rep = delta.resonance_locate(delta.DeltaConfig(g0=1e-3), 1)
    assert rep.iterations <= 3
    assert rep.eps_res == pytest.approx(1 - 0.25e-6, abs=1e-6)


def test_no_fixed_point_when_channel_closed():
    with pytest.raises(errors.NoFixedPointError):
        delta.resonance_locate(delta.DeltaConfig(g0=2.5, k_max=14.0), 1)


def test_sideband_index_must_be_positive(delta_default):
    with pytest.raises(errors.ValidationError):
        delta.resonance_locate(delta_default[0], 0)


def test_im_energy_correction_positive(delta_default):
    cfg, table, model, means = delta_default
    for n in (1, 2, 3):
        for eps in (0.3, 0.9, 1.7, 2.6):
            de = engine.energy_correction(model, BOUND, continuum(math.sqrt(2 * eps)), n, table, means)
            if eps - n - (-cfg.nu_max) > 0:
                assert de.imag > 0


def test_transmission_profile(delta_default, resonance):
    cfg, table, _, _ = delta_default
    grid = np.linspace(resonance.eps_res - 0.5, resonance.eps_res + 0.5, 101)
    prof = delta.transmission_ratio(cfg, grid, table=table)
    v = prof.values
    assert prof.source == "GPPA_ratio"
    assert np.all(v >= 0) and np.all(v <= 1 + 1e-9)
    assert prof.minimum()[0] == pytest.approx(resonance.eps_res)


def test_transmission_off_resonance(delta_default):
    cfg, table, _, _ = delta_default
    prof = delta.transmission_ratio(cfg, [2.4, 2.5], table=table)
    assert np.all(np.abs(prof.values - 1) < 1e-3)


def test_transmission_threads_are_deterministic(delta_default):
    cfg, table, _, _ = delta_default
    grid = np.linspace(0.6, 1.2, 9)
    a = delta.transmission_ratio(cfg, grid, table=table, threads=1)
    b = delta.transmission_ratio(cfg, grid, table=table, threads=4)
    assert a.samples == b.samples


def test_zero_coupling_transmission():
    cfg = delta.DeltaConfig(g0=0.0, n_k=40)
    prof = delta.transmission_ratio(cfg, np.linspace(0.2, 3.0, 15))
    assert np.all(prof.values == 1.0)


def test_continuum_term_is_finite_and_dominates_high_sidebands(delta_default):
    cfg, table, _, _ = delta_default
    a = delta.continuum_term(cfg, 3.5, 1e-2)
    b = delta.continuum_term(cfg, 3.5, 1e-3)
    assert abs(a - b) < 0.01 * abs(a)
    assert abs(delta.first_term(table, 3.5, 3)) < abs(b)
