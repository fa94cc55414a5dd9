import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import wofz

from qdrift.errors import ConvergenceError, DomainError
from qdrift.geometry import metric_from_payoff, unit_metric
from qdrift.payoffs import Payoff
from qdrift.spectral import distribution_moments, eigen_transform, parseval_check, weighted_mass
from qdrift.statespace import make_gaussian


def _gauss_params(state):
    # psi = c exp(-a x^2 + i k0 x) for a centred state
    s2 = state.sigma_s ** 2
    c = (2 * math.pi * s2) ** -0.25
    a = 0.25 / s2 - 0.5j * state.chirp_rate
    return c, a


def half_line_oracle(state, k):
    """int_0^inf psi(x) exp(-i k x) dx via the Faddeeva function."""
    c, a = _gauss_params(state)
    ra = np.sqrt(a)
    return c * 0.5 * np.sqrt(np.pi) / ra * wofz(-(k - state.k0) / (2 * ra))


def full_line_oracle(state, k):
    c, a = _gauss_params(state)
    return c * np.sqrt(np.pi / a) * np.exp(-((k - state.k0) ** 2) / (4 * a))


STATES = [make_gaussian(0, 0.2), make_gaussian(0, 0.2, 1.0), make_gaussian(0, 0.2, -1.0, 0.5),
          make_gaussian(0, 0.5, 2.0, -1.0)]


@pytest.mark.parametrize("state", STATES)
def test_half_line_transform_matches_faddeeva(state):
    d = eigen_transform(state, metric_from_payoff(Payoff("call")), 0.2, -2.0, 2.0, 257, check_tails=False)
    ref = half_line_oracle(state, d.k)
    assert np.max(np.abs(d.samples - ref)) < 1e-10 * np.max(np.abs(ref))


@pytest.mark.parametrize("state", STATES)
def test_full_line_transform_matches_closed_form(state):
    d = eigen_transform(state, unit_metric(), 0.3)
    ref = full_line_oracle(state, d.k)
    assert np.max(np.abs(d.samples - ref)) < 1e-10 * np.max(np.abs(ref))
    assert d.tails_decayed


def test_smooth_metric_transform_against_quadrature():
    state = make_gaussian(0.1, 0.3, 0.7, 0.2)
    g = metric_from_payoff(Payoff("smooth_call", 0.0, beta=3.0))
    d = eigen_transform(state, g, 0.2, -1.0, 1.0, 64, check_tails=False)
    for lam, val in zip(d.lambdas[::9], d.samples[::9]):
        k = lam / 0.04
        f = lambda x, part: part(np.sqrt(g(x)) * state.amplitude(x) * np.exp(-1j * k * x))  # noqa: E731
        lo, hi = -4.0, 4.0
        re = quad(f, lo, hi, args=(np.real,), limit=400, epsabs=1e-13)[0]
        im = quad(f, lo, hi, args=(np.imag,), limit=400, epsabs=1e-13)[0]
        assert abs(val - (re + 1j * im)) < 1e-9


@pytest.mark.parametrize("payoff", [Payoff("forward"), Payoff("smooth_call", 0.1, beta=5.0),
                                    Payoff("exponential", 0.0, beta=1.0)])
def test_parseval(payoff, chirped_state):
    g = metric_from_payoff(payoff)
    d = eigen_transform(chirped_state, g, 0.2)
    assert parseval_check(d, chirped_state, g) < 1e-8


def test_parseval_with_algebraic_tails(boosted_state):
    # the indicator metric's density decays like k^-2; the fitted tail restores the mass
    g = metric_from_payoff(Payoff("call"))
    d = eigen_transform(boosted_state, g, 0.2)
    assert parseval_check(d, boosted_state, g) < 1e-6
    assert d.tail_mass > 0


def test_weighted_mass_half_line(real_state):
    assert weighted_mass(real_state, metric_from_payoff(Payoff("call"))) == pytest.approx(0.5, abs=1e-12)


def test_first_moment_of_boosted_gaussian():
    # |psi~|^2 is centred on k0 for the unit metric: mean lambda = sigma^2 k0
    state = make_gaussian(0.0, 0.2, 0.0, 0.5)
    d = eigen_transform(state, unit_metric(), 0.2)
    mean, var = distribution_moments(d)
    assert mean == pytest.approx(0.04 * 0.5, abs=1e-10)
    # variance in k is 1/(4 sigma_s^2)
    assert var == pytest.approx(0.04 ** 2 / (4 * 0.04), rel=1e-8)


def test_explicit_window_requires_decay(real_state):
    g = metric_from_payoff(Payoff("call"))
    with pytest.raises(ConvergenceError):
        eigen_transform(real_state, g, 0.2, -0.01, 0.01, 128)
    with pytest.raises(DomainError):
        eigen_transform(real_state, g, 0.2, 0.1, -0.1)
    with pytest.raises(DomainError):
        eigen_transform(real_state, g, 0.0)


def test_conjugation_flips_mean(chirped_state):
    from qdrift.statespace import conjugate

    g = metric_from_payoff(Payoff("call"))
    d = eigen_transform(chirped_state, g, 0.2, -1.6, 1.6, 2001, check_tails=False)
    dc = eigen_transform(conjugate(chirped_state), g, 0.2, -1.6, 1.6, 2001, check_tails=False)
    assert np.allclose(dc.density, d.density[::-1], rtol=1e-12, atol=0)
    assert distribution_moments(dc)[0] == pytest.approx(-distribution_moments(d)[0], abs=1e-15)


def test_real_state_symmetric_domain_has_zero_mean(real_state):
    d = eigen_transform(real_state, metric_from_payoff(Payoff("call")), 0.2, -1.6, 1.6, 2001, check_tails=False)
    assert abs(distribution_moments(d)[0]) < 1e-8


@pytest.mark.parametrize("sig", [0.05, 0.3, 1.0])
def test_sigma_rescaling_covariance(chirped_state, sig):
    g = metric_from_payoff(Payoff("call"))
    base = eigen_transform(chirped_state, g, 0.2, -1.6, 1.6, 513, check_tails=False)
    r = (sig / 0.2) ** 2
    other = eigen_transform(chirped_state, g, sig, -1.6 * r, 1.6 * r, 513, check_tails=False)
    assert np.allclose(other.lambdas, base.lambdas * r, rtol=1e-14)
    assert np.max(np.abs(other.density - base.density)) <= 1e-8 * base.density.max()


@pytest.mark.parametrize("payoff", [Payoff("call", 0.05), Payoff("digital", 0.0, epsilon=0.05)])
def test_asymptotic_tail_model_matches_far_field(payoff, chirped_state):
    from qdrift.payoffs import kinks
    from qdrift.spectral import _effective_width, _integration_domain, _legendre_panels, _tail_model, _transform_k

    g = metric_from_payoff(payoff)
    a, b = _integration_domain(chirped_state, g)
    forced = list(kinks(payoff))
    c, h, coef = _legendre_panels(lambda x: g.sqrt(x) * chirped_state.amplitude(x), a, b, forced,
                                  0.5 * _effective_width(chirped_state))
    model = _tail_model(c, h, coef, a, b, forced)
    k = np.array([-3000.0, -1234.5, 2000.0, 4321.0])
    exact = _transform_k(c, h, coef, k)
    assert np.max(np.abs(model.amplitude(k) - exact)) < 1e-6 * np.max(np.abs(exact))
