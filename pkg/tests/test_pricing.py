import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.stats import norm

from qdrift.errors import ConvergenceError, DomainError
from qdrift.payoffs import Payoff, payoff_value
from qdrift.pricing import (SPECTRAL_DRIFT_CONSTANT, HamiltonianSpec, calibrate_spectral_constant,
                            classical_limit_sweep, first_order_price, hamiltonian, martingale_check,
                            quantum_drift_commutator, quantum_drift_spectral, segment_distributions,
                            spectral_drift, zeroth_price)
from qdrift.spectral import eigen_transform
from qdrift.geometry import metric_from_payoff
from qdrift.statespace import make_gaussian, to_grid


def call_drift_oracle(x0, s, alpha, k0, strike, sigma_h):
    """sigma^2 (k0 P[X > K] + b E[(X - x0) 1{X > K}]) for a chirped, boosted Gaussian."""
    b = alpha / (math.sqrt(2) * s * s)
    d = (x0 - strike) / s
    return sigma_h ** 2 * (k0 * norm.cdf(d) + b * s * norm.pdf(d))


def test_bachelier_spot_value(real_state):
    assert zeroth_price(real_state, Payoff("call")) == pytest.approx(0.2 / math.sqrt(2 * math.pi), abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(x0=st.floats(-1, 1), s=st.floats(0.05, 1.0), k=st.floats(-1, 1),
       kind=st.sampled_from(["forward", "call", "put", "straddle", "floor"]))
def test_zeroth_price_matches_quadrature(x0, s, k, kind):
    state = make_gaussian(x0, s, 0.3)
    p = Payoff(kind, k)
    ref = quad(lambda x: payoff_value(p, x) * state.density(x), x0 - 14 * s, x0 + 14 * s,
               points=[k] if abs(k - x0) < 14 * s else None, epsabs=1e-13, limit=200)[0]
    assert zeroth_price(state, p) == pytest.approx(ref, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(x0=st.floats(-0.5, 0.5), s=st.floats(0.1, 0.5), a=st.floats(-2, 2), k0=st.floats(-1, 1),
       k=st.floats(-0.5, 0.5), sig=st.floats(0.05, 0.5))
def test_commutator_drift_closed_form(x0, s, a, k0, k, sig):
    state = make_gaussian(x0, s, a, k0)
    mu = quantum_drift_commutator(state, Payoff("call", k), HamiltonianSpec(sig))
    assert mu == pytest.approx(call_drift_oracle(x0, s, a, k0, k, sig), abs=1e-11)


def test_known_drifts(chirped_state, boosted_state, free_h):
    assert quantum_drift_commutator(chirped_state, Payoff("call"), free_h) == pytest.approx(0.0564189584, abs=1e-10)
    assert quantum_drift_commutator(chirped_state, Payoff("straddle"), free_h) == pytest.approx(0.1128379167, abs=1e-9)
    assert quantum_drift_commutator(boosted_state, Payoff("forward"), free_h) == pytest.approx(0.02, abs=1e-14)


@pytest.mark.parametrize("payoff", [Payoff("call"), Payoff("straddle"), Payoff("put", 0.1),
                                    Payoff("smooth_call", 0.0, beta=10.0), Payoff("exponential", 0.0, beta=1.0),
                                    Payoff("digital", 0.0, epsilon=0.05)])
@pytest.mark.parametrize("alpha,k0", [(1.0, 0.0), (-0.5, 0.3)])
def test_spectral_drift_equals_commutator(payoff, alpha, k0, free_h):
    state = make_gaussian(0.05, 0.2, alpha, k0)
    mu_c = quantum_drift_commutator(state, payoff, free_h)
    assert spectral_drift(state, payoff, free_h) == pytest.approx(mu_c, rel=1e-6, abs=1e-12)


def test_calibrated_constant():
    assert calibrate_spectral_constant() == pytest.approx(SPECTRAL_DRIFT_CONSTANT, rel=1e-10)
    assert calibrate_spectral_constant(make_gaussian(0.3, 0.5, 1.0, -0.7), 0.3) == pytest.approx(
        SPECTRAL_DRIFT_CONSTANT, rel=1e-10)
    with pytest.raises(DomainError):
        calibrate_spectral_constant(make_gaussian(0, 0.2))


def test_spectral_drift_refuses_truncated_distribution(real_state):
    d = eigen_transform(real_state, metric_from_payoff(Payoff("call")), 0.2, -0.01, 0.01, 128, check_tails=False)
    with pytest.raises(ConvergenceError):
        quantum_drift_spectral(d)


def test_grid_state_drift(chirped_state, free_h):
    g = to_grid(chirped_state, n=8193)
    mu = quantum_drift_commutator(g, Payoff("call"), free_h)
    assert mu == pytest.approx(0.0564189584, rel=1e-5)
    assert zeroth_price(g, Payoff("call")) == pytest.approx(zeroth_price(chirped_state, Payoff("call")), rel=1e-6)


def test_first_order_price(chirped_state, free_h):
    e = first_order_price(chirped_state, Payoff("call"), free_h, t=0.1, r=0.05)
    assert e.price() == pytest.approx(math.exp(-0.005) * (e.p0 + 0.1 * e.mu))
    assert e.mu_spectral == pytest.approx(e.mu, rel=1e-8)
    assert e.horizon == pytest.approx(0.1 * e.p0 / e.mu)
    d = e.to_dict()
    assert d["price"] == e.value and d["order"] == 1
    with pytest.raises(DomainError):
        first_order_price(chirped_state, Payoff("call"), free_h, t=-1.0)


def test_real_state_has_no_drift(real_state, free_h):
    e = first_order_price(real_state, Payoff("call"), free_h, t=1.0)
    assert e.mu == 0.0 and math.isinf(e.horizon) and e.to_dict()["horizon"] is None


def test_martingale_check(real_state, chirped_state, boosted_state, free_h):
    assert martingale_check(real_state, free_h).arbitrage_free
    assert martingale_check(chirped_state, free_h).arbitrage_free
    assert not martingale_check(boosted_state, free_h).arbitrage_free
    assert not martingale_check(real_state, hamiltonian(0.2, "linear", 0.5)).arbitrage_free


def test_hamiltonian_construction():
    h = hamiltonian(0.2, "harmonic", 2.0, 0.5)
    assert np.allclose(h.potential(np.array([0.5, 1.5])), [0.0, 1.0])
    assert np.allclose(h.dpotential(np.array([1.5])), [2.0])
    with pytest.raises(DomainError):
        hamiltonian(0.2, "cubic", 1.0)
    with pytest.raises(DomainError):
        HamiltonianSpec(0.0)


def test_sweep_scaling(chirped_state):
    rows = classical_limit_sweep(chirped_state, Payoff("call"), [0.05, 0.1, 0.2])
    mus = np.array([r.mu for r in rows])
    assert np.allclose(mus / mus[-1], [1 / 16, 1 / 4, 1.0], rtol=1e-12)
    assert all(abs(r.width_ratio - 1.0) < 1e-9 for r in rows)
    with pytest.raises(DomainError):
        classical_limit_sweep(chirped_state, Payoff("call"), [])


def test_segment_distributions_per_segment(chirped_state):
    ds = segment_distributions(chirped_state, Payoff("straddle"), 0.2)
    assert [d.orientation for d in ds] == [-1, 1]
