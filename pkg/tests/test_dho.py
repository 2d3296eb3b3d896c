import math
import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from gppa import dho, errors, spectral
from gppa.spectral import discrete
from oracles import forced_oscillator_ode, poisson_row


def test_sigma_guard():
    with pytest.raises(errors.ValidationError) as exc:
        dho.PolyDriving(1.0, sigma=1.0, Omega=1.0)
    assert "sigma/Omega below 5" in exc.value.violations
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        dho.PolyDriving(1.0, sigma=1.0, Omega=1.0, force=True)
    assert w


def test_j_tilde_examples():
    d = dho.PolyDriving(3.0, 50.0)
    assert dho.j_tilde(d, 0.0) == 0
    expected = 3.0 / (2 * 50.0) * (1 - math.exp(-2 / 50.0 ** 2))
    assert abs(dho.j_tilde(d, 1.0)) == pytest.approx(expected, rel=1e-12)


def test_j_tilde_against_quadrature():
    d = dho.PolyDriving(2.0, 5.0)
    t = np.linspace(-3, 3, 6001)
    for k in (0.5, 1.0, 4.0):
        num = np.trapezoid(d.J(t) * np.exp(1j * k * t), t) / math.sqrt(2 * math.pi)
        assert abs(num - dho.j_tilde(d, k)) < 1e-10


def test_finite_sample_transform():
    # the windowed transform of a seeded N = 10^4 sample estimates the averaged transform
    inf = dho.PolyDriving(1.0, 5.0)
    fin = dho.PolyDriving(1.0, 5.0, N_pulses=10_000, seed=7)
    k = np.linspace(-12, 12, 25)
    mean, err = dho.j_tilde_sampled(fin, k, window=40.0)
    assert np.all(np.abs(mean - dho.j_tilde(inf, k)) <= 3 * err)


def test_alpha_parameter_round_trip():
    for a in (0.0, 0.3, 1.0):
        d = dho.driving_for_alpha(a) if a else dho.PolyDriving(0.0, 5.0)
        assert dho.alpha_parameter(d) == pytest.approx(a, abs=1e-14)


def test_f_polynomial():
    assert dho.f_polynomial(0, 0.7) == 1
    assert dho.f_polynomial(1, 0.3) == pytest.approx(1 - 0.6 + 0.09)
    assert dho.f_polynomial(2, 0.01) == pytest.approx(0.9605)


def test_flip_matches_finite_difference():
    model = dho.DhoModel(dho.driving_for_alpha(0.4))
    for t in (-0.3, 0.05, 0.21):
        for n, m in ((0, 1), (2, 1), (3, 4)):
            closed = model.flip(discrete(n), discrete(m), t)
            fd = spectral._finite_difference_flip(model, discrete(n), discrete(m), t)
            assert abs(closed - fd) < 1e-6 * max(1.0, abs(closed))
    # non-neighbours do not couple
    assert model.flip(discrete(0), discrete(2), 0.1) == 0


def test_mean_energy_and_phase():
    model = dho.DhoModel(dho.driving_for_alpha(0.5))
    table, means = model.table(3)
    assert means[discrete(2)] == 2.5
    # the closed-form J^2 integral against quadrature
    num, _ = quad(lambda t: float(model.driving.J(t)) ** 2, -3.0, 0.4, epsabs=1e-13, epsrel=1e-13, limit=200)
    assert model._j2_integral(0.4) - model._j2_integral(-3.0) == pytest.approx(num, rel=1e-11)


@pytest.mark.parametrize("a", [0.2, 0.7, 1.0])
def test_exact_against_ode(a):
    d = dho.driving_for_alpha(a)
    for start in (0, 1, 2):
        p = forced_oscillator_ode(d, start)
        assert p[40:].sum() < 1e-12
        ex = dho.probabilities_exact(a, [(n, start) for n in range(6)])
        for n in range(6):
            assert abs(p[n] - ex[(n, start)]) < 1e-9


def test_exact_trivial():
    assert dho.probabilities_exact(0.0, [(1, 1), (2, 0)]) == {(1, 1): 1.0, (2, 0): 0.0}
    assert dho.probabilities_exact(0.5, [(0, 0)])[(0, 0)] == pytest.approx(math.exp(-0.25))


@pytest.fixture(scope="module")
def half():
    return dho.dho_probabilities(0.5, [(0, 0), (1, 0), (2, 0), (1, 1), (2, 1), (2, 2)])


def test_gppa_recovers_n0_family(half):
    for n in range(3):
        assert half.P["gppa"][(n, 0)] == pytest.approx(poisson_row(0.5, n), rel=1e-10)


def test_gppa_beats_apt(half):
    ex = half.P["exact"]
    for pair in ((2, 1), (2, 2)):
        assert abs(half.P["gppa"][pair] - ex[pair]) <= abs(half.P["apt4"][pair] - ex[pair])


def test_diagonal_uses_f_polynomial(half):
    for n in (1, 2):
        assert half.f_values[n] == pytest.approx(dho.f_polynomial(n, 0.25), abs=1e-9)
        assert half.P["gppa"][(n, n)] == pytest.approx(math.exp(-0.25) * half.f_values[n], rel=1e-12)


def test_apt_leading_order():
    res = dho.dho_probabilities(0.05, [(1, 0)])
    assert res.P["apt4"][(1, 0)] == pytest.approx(0.05 ** 2, rel=5e-3)


def test_apt_agrees_with_gppa_to_fourth_order():
    a = 0.05
    res = dho.dho_probabilities(a, [(1, 1), (2, 2)])
    for pair in ((1, 1), (2, 2)):
        assert abs(res.P["apt4"][pair] - res.P["gppa"][pair]) < 10 * a ** 6


def test_zero_coupling_is_identity():
    res = dho.dho_probabilities(0.0, [(1, 1), (2, 0)])
    for key in ("gppa", "apt4", "exact"):
        assert res.P[key] == {(1, 1): 1.0, (2, 0): 0.0}
