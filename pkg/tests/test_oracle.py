import math

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from qdrift.errors import ConvergenceError, DomainError
from qdrift.oracle import (CayleyStepper, EvolutionResult, build_hamiltonian_grid, default_grid, evolution_drift,
                           evolve_state, finite_diff_drift, first_order_residuals, grid_commutator_drift,
                           grid_expectation, grid_momentum, grid_norm, heisenberg_expectation_curve, on_grid,
                           spreading_variance, uniform_grid)
from qdrift.payoffs import Payoff
from qdrift.pricing import hamiltonian, quantum_drift_commutator
from qdrift.statespace import make_gaussian


def test_cayley_against_matrix_exponential(chirped_state, free_h):
    x = default_grid(chirped_state, n=513)
    Hg = build_hamiltonian_grid(free_h, x)
    psi0 = on_grid(chirped_state, Hg).psi
    t = 0.05
    exact = expm_multiply(-1j * t * sp.csc_matrix(Hg.matrix()), psi0)
    approx = evolve_state(chirped_state, Hg, t, steps=400).psi
    assert np.max(np.abs(approx - exact)) < 1e-6 * np.max(np.abs(exact))


def test_cayley_is_second_order(real_state, free_h):
    x = default_grid(real_state, n=513)
    Hg = build_hamiltonian_grid(free_h, x)
    psi0 = on_grid(real_state, Hg).psi
    exact = expm_multiply(-1j * 0.2 * sp.csc_matrix(Hg.matrix()), psi0)
    e = [np.max(np.abs(evolve_state(real_state, Hg, 0.2, s).psi - exact)) for s in (20, 40)]
    assert e[0] / e[1] == pytest.approx(4.0, rel=0.05)


@pytest.mark.parametrize("alpha", [0.0, 1.0, -1.0])
def test_spreading_law(alpha, free_h):
    state = make_gaussian(0.0, 0.2, alpha)
    x = default_grid(state, spread=1.0, n=4097)
    Hg = build_hamiltonian_grid(free_h, x)
    psi = evolve_state(state, Hg, 0.5, steps=200).psi
    h = Hg.h
    m = grid_expectation(psi, Hg.x, h)
    var = grid_expectation(psi, (Hg.x - m) ** 2, h)
    assert var == pytest.approx(spreading_variance(0.2, 0.2, alpha, 0.5), rel=1e-4)


def test_unitarity_and_conserved_moments(chirped_state, free_h):
    res = heisenberg_expectation_curve(chirped_state, Payoff("call"), free_h, 0.5, 26)
    assert res.norm_drift < 1e-9
    assert np.ptp(res.e_x) < 1e-9
    assert np.ptp(res.e_p) < 1e-9
    assert res.meta["boundary_mass"] < 1e-8


def test_boundary_breach_suggests_wider_grid(chirped_state, free_h):
    narrow = np.linspace(-0.6, 0.6, 1025)
    with pytest.raises(ConvergenceError, match="widen the grid"):
        heisenberg_expectation_curve(chirped_state, Payoff("call"), free_h, 5.0, 6, x=narrow)


def test_grid_drift_matches_evolution_slope(chirped_state, free_h):
    x = default_grid(chirped_state)
    Hg = build_hamiltonian_grid(free_h, x)
    s = on_grid(chirped_state, Hg)
    p = Payoff("call")
    assert evolution_drift(chirped_state, p, free_h) == pytest.approx(grid_commutator_drift(s, p, free_h), rel=1e-5)


@pytest.mark.parametrize("payoff", [Payoff("call"), Payoff("straddle"), Payoff("smooth_call", 0.0, beta=10.0)])
def test_evolution_drift_matches_commutator(payoff, chirped_state, free_h):
    mu = quantum_drift_commutator(chirped_state, payoff, free_h)
    assert evolution_drift(chirped_state, payoff, free_h) == pytest.approx(mu, rel=1e-4)


def test_commuting_potential_does_not_change_drift(chirped_state):
    p = Payoff("call")
    free = evolution_drift(chirped_state, p, hamiltonian(0.2))
    harm = evolution_drift(chirped_state, p, hamiltonian(0.2, "harmonic", 3.0))
    assert abs(free - harm) < 1e-8


def test_finite_diff_drift_removes_polynomial_bias():
    t = np.linspace(0, 0.01, 6)
    e = 1.0 + 2.0 * t + 3.0 * t ** 2 - 4.0 * t ** 3
    res = EvolutionResult(t, e, t * 0, t * 0, t * 0 + 1, {})
    assert finite_diff_drift(res, order=4) == pytest.approx(2.0, abs=1e-10)
    with pytest.raises(DomainError):
        finite_diff_drift(res, order=8)


def test_first_order_remainder_is_quadratic(chirped_state, free_h):
    fit = first_order_residuals(chirped_state, Payoff("call"), free_h, np.logspace(-4, -2, 7))
    assert abs(fit.exponent - 2.0) < 0.05


def test_grid_helpers():
    x = np.linspace(-10, 10, 4001)
    h = x[1] - x[0]
    psi = (2 * math.pi) ** -0.25 * np.exp(-x ** 2 / 4 + 0.7j * x)
    assert grid_norm(psi, h) == pytest.approx(1.0, abs=1e-10)
    assert grid_momentum(psi, h) == pytest.approx(0.7, rel=1e-4)
    with pytest.raises(DomainError):
        uniform_grid(np.array([0.0, 1.0, 3.0]))


def test_evolution_csv_round_trip(chirped_state, free_h):
    res = heisenberg_expectation_curve(chirped_state, Payoff("call"), free_h, 0.1, 5)
    lines = res.to_csv().splitlines()
    assert lines[0] == "t,E_U,E_X,E_P,norm" and len(lines) == 6
    assert float(lines[1].split(",")[1]) == res.e_u[0]


def test_evolve_rejects_bad_arguments(real_state, free_h):
    Hg = build_hamiltonian_grid(free_h, default_grid(real_state, n=301))
    with pytest.raises(DomainError):
        evolve_state(real_state, Hg, -1.0)
    with pytest.raises(DomainError):
        evolve_state(real_state, Hg, 1.0, steps=0)
    assert isinstance(CayleyStepper(Hg, 0.1).step(np.ones(Hg.n, complex)), np.ndarray)
