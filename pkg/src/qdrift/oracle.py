"""Brute-force grid Hamiltonian, unitary evolution and expectation curves.

Everything here works on a uniform grid with Dirichlet ends.  Grid states
are normalised so that sum |psi_j|^2 h = 1 (the trapezoid rule, given that
the amplitudes vanish at the ends), and an observable A has expectation
h * sum conj(psi) A psi.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConvergenceError, DomainError
from .payoffs import Payoff, payoff_value
from .pricing import HamiltonianSpec
from .statespace import MarketState, to_grid

BOUNDARY_MASS = 1e-8
MIN_POINTS = 256


@dataclass(frozen=True, eq=False)
class GridOperator:
    """Symmetric tridiagonal operator: diag on the main, off on both side diagonals."""

    x: np.ndarray
    diag: np.ndarray
    off: np.ndarray
    hermitian: bool = True

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    def matrix(self) -> sp.csc_matrix:
        return sp.diags([self.off, self.diag, self.off], [-1, 0, 1], format="csc")

    def apply(self, psi: np.ndarray) -> np.ndarray:
        out = self.diag * psi
        out[:-1] += self.off * psi[1:]
        out[1:] += self.off * psi[:-1]
        return out


def uniform_grid(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < MIN_POINTS:
        raise DomainError(f"grid needs at least {MIN_POINTS} points")
    d = np.diff(x)
    if np.any(d <= 0) or np.max(np.abs(d - d.mean())) > 1e-9 * d.mean():
        raise DomainError("grid must be uniform and increasing")
    return x


def build_hamiltonian_grid(H: HamiltonianSpec, x) -> GridOperator:
    """-(sigma^2/2) D2 + diag(V) with the three-point second difference."""
    x = uniform_grid(x)
    h = x[1] - x[0]
    c = 0.5 * H.sigma_h ** 2 / h ** 2
    diag = 2.0 * c + np.asarray(H.potential(x), dtype=float)
    off = np.full(x.size - 1, -c)
    return GridOperator(x, diag, off)


def default_grid(state: MarketState, spread: float = 0.0, n: int = 4097) -> np.ndarray:
    """Uniform grid over x0 +/- (10 sigma_s + spread), odd size so x0 is a node."""
    if state.is_grid:
        return uniform_grid(state.x)
    half = 10.0 * state.sigma_s + spread
    n = int(n) | 1
    return np.linspace(state.x0 - half, state.x0 + half, n)


def on_grid(state: MarketState, Hg: GridOperator) -> MarketState:
    if state.is_grid:
        if state.x.shape != Hg.x.shape or not np.allclose(state.x, Hg.x, rtol=0, atol=1e-12):
            raise DomainError("state is not sampled on the Hamiltonian's grid")
        return state
    return to_grid(state, float(Hg.x[0]), float(Hg.x[-1]), Hg.n)


class CayleyStepper:
    """(I + i H dt/2) psi_new = (I - i H dt/2) psi_old, factorised once."""

    def __init__(self, Hg: GridOperator, dt: float):
        self.Hg = Hg
        self.dt = float(dt)
        eye = sp.identity(Hg.n, format="csc", dtype=complex)
        Hm = Hg.matrix().astype(complex)
        try:
            self._lu = splu((eye + 0.5j * self.dt * Hm).tocsc())
        except RuntimeError as exc:
            raise ConvergenceError(f"Cayley factorisation failed: {exc}") from exc

    def step(self, psi: np.ndarray, steps: int = 1) -> np.ndarray:
        for _ in range(steps):
            rhs = psi - 0.5j * self.dt * self.Hg.apply(psi)
            psi = self._lu.solve(rhs)
        return psi


def evolve_state(state: MarketState, Hg: GridOperator, t: float, steps: int = 1) -> MarketState:
    """exp(-i H t) psi by ``steps`` Cayley steps."""
    if steps < 1:
        raise DomainError("steps must be at least 1")
    if t < 0:
        raise DomainError("t must be non-negative")
    s = on_grid(state, Hg)
    if t == 0:
        return s
    psi = CayleyStepper(Hg, t / steps).step(s.psi.astype(complex), steps)
    if not np.all(np.isfinite(psi)):
        raise ConvergenceError("evolution produced non-finite amplitudes")
    return replace(s, psi=psi)


def grid_norm(psi: np.ndarray, h: float) -> float:
    return float(np.sqrt(h * np.sum(np.abs(psi) ** 2)))


def grid_expectation(psi: np.ndarray, values: np.ndarray, h: float) -> float:
    return float(h * np.sum(values * np.abs(psi) ** 2))


def grid_momentum(psi: np.ndarray, h: float) -> float:
    """Re <psi| -i D1 |psi> with central differences, endpoints excluded."""
    d = (psi[2:] - psi[:-2]) / (2.0 * h)
    return float(h * np.sum(np.imag(np.conj(psi[1:-1]) * d)))


def boundary_mass(psi: np.ndarray, h: float, width: int | None = None) -> float:
    """Mass in the outer ``width`` nodes at each end (default n/64)."""
    n = psi.size
    w = max(8, n // 64) if width is None else int(width)
    rho = np.abs(psi) ** 2
    return float(h * (rho[:w].sum() + rho[-w:].sum()))


def grid_commutator_drift(state: MarketState, p: Payoff, H: HamiltonianSpec) -> float:
    """Exact d/dt <U0> at t = 0 for the grid Hamiltonian.

    i <psi|[H, U0]|psi> = sigma^2 / h * sum (U_{j+1} - U_j) Im(conj(psi_j) psi_{j+1}).
    """
    if not state.is_grid:
        raise DomainError("grid_commutator_drift needs a grid state")
    x = uniform_grid(state.x)
    h = x[1] - x[0]
    u = payoff_value(p, x)
    psi = state.psi
    return float(H.sigma_h ** 2 / h * np.sum(np.diff(u) * np.imag(np.conj(psi[:-1]) * psi[1:])))


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    times: np.ndarray
    e_u: np.ndarray
    e_x: np.ndarray
    e_p: np.ndarray
    norm: np.ndarray
    meta: dict

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norm - 1.0)))

    def rows(self):
        return np.column_stack([self.times, self.e_u, self.e_x, self.e_p, self.norm])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,E_U,E_X,E_P,norm\n")
        for r in self.rows():
            buf.write(",".join(f"{v:.17g}" for v in r) + "\n")
        return buf.getvalue()


def heisenberg_expectation_curve(state: MarketState, p: Payoff, H: HamiltonianSpec, t_max: float,
                                 samples: int, substeps: int = 4, x=None) -> EvolutionResult:
    """<U0>, <X>, <P> and the norm on ``samples`` uniform times in [0, t_max]."""
    if samples < 2:
        raise DomainError("need at least two time samples")
    if not t_max > 0:
        raise DomainError("t_max must be positive")
    if x is None:
        x = default_grid(state)
    Hg = build_hamiltonian_grid(H, x)
    s = on_grid(state, Hg)
    h = Hg.h
    u = payoff_value(p, Hg.x)
    times = np.linspace(0.0, t_max, samples)
    stepper = CayleyStepper(Hg, (times[1] - times[0]) / substeps)
    psi = s.psi.astype(complex)
    out = np.empty((samples, 4))
    for j in range(samples):
        if j:
            psi = stepper.step(psi, substeps)
        out[j] = (grid_expectation(psi, u, h), grid_expectation(psi, Hg.x, h),
                  grid_momentum(psi, h), grid_norm(psi, h))
    edge = boundary_mass(psi, h)
    if edge > BOUNDARY_MASS:
        span = Hg.x[-1] - Hg.x[0]
        raise ConvergenceError(
            f"boundary mass {edge:.2e} exceeds {BOUNDARY_MASS:g} at t={t_max}; "
            f"widen the grid beyond [{Hg.x[0]:.4g}, {Hg.x[-1]:.4g}] (try a span of {2 * span:.4g})")
    meta = {"n": int(Hg.n), "h": h, "dt": float(stepper.dt), "substeps": int(substeps),
            "x_min": float(Hg.x[0]), "x_max": float(Hg.x[-1]), "boundary_mass": edge}
    return EvolutionResult(times, out[:, 0], out[:, 1], out[:, 2], out[:, 3], meta)


def finite_diff_drift(result: EvolutionResult, order: int = 4) -> float:
    """Richardson-extrapolated d<U0>/dt at t = 0.

    The difference quotients D(t_j) = (E(t_j) - E(0)) / t_j for the first
    ``order`` positive times are extrapolated to t = 0 by a polynomial fit,
    which removes the O(t), ..., O(t^(order-1)) errors.
    """
    t = np.asarray(result.times, float)
    if t.size < order + 1 or order < 1:
        raise DomainError(f"need at least {order + 1} time samples, got {t.size}")
    if t[0] != 0.0:
        raise DomainError("the first time sample must be t = 0")
    tj = t[1:order + 1]
    D = (result.e_u[1:order + 1] - result.e_u[0]) / tj
    coef = np.polynomial.polynomial.polyfit(tj / tj[-1], D, order - 1)
    return float(coef[0])


def evolution_drift(state: MarketState, p: Payoff, H: HamiltonianSpec, x=None,
                    dt: float = 2.5e-4, substeps: int = 4, order: int = 4) -> float:
    """finite_diff_drift on a short curve: ``order`` samples spaced substeps * dt."""
    res = heisenberg_expectation_curve(state, p, H, order * substeps * dt, order + 1, substeps, x)
    return finite_diff_drift(res, order)


def spreading_variance(sigma_s: float, sigma_h: float, alpha: float, t: float) -> float:
    """Position variance of a free chirped Gaussian at time t.

    With chirp rate b = alpha / (sqrt(2) sigma_s^2) and H = -(sigma_h^2/2) d^2:
    var = s^2 + 2 sigma_h^2 t b s^2 + sigma_h^4 t^2 (1/(4 s^2) + b^2 s^2).
    """
    s2 = sigma_s ** 2
    b = alpha / (math.sqrt(2.0) * s2)
    return s2 + 2.0 * sigma_h ** 2 * t * b * s2 + sigma_h ** 4 * t * t * (0.25 / s2 + b * b * s2)


@dataclass(frozen=True, eq=False)
class FirstOrderFit:
    times: np.ndarray
    residuals: np.ndarray
    exponent: float
    p0: float
    mu: float


def first_order_residuals(state: MarketState, p: Payoff, H: HamiltonianSpec, times, steps: int = 4,
                          x=None) -> FirstOrderFit:
    """|<U0>(t) - (p0 + mu t)| on the grid, with the log-log slope over ``times``.

    p0 and mu are the grid's own values so that discretisation error in the
    continuum quantities does not mask the t^2 remainder.
    """
    times = np.asarray(times, float)
    if times.size < 2 or np.any(times <= 0):
        raise DomainError("need at least two positive times")
    if x is None:
        x = default_grid(state)
    Hg = build_hamiltonian_grid(H, x)
    s = on_grid(state, Hg)
    u = payoff_value(p, Hg.x)
    p0 = grid_expectation(s.psi, u, Hg.h)
    mu = grid_commutator_drift(s, p, H)
    res = np.array([abs(grid_expectation(evolve_state(s, Hg, t, steps).psi, u, Hg.h) - p0 - mu * t)
                    for t in times])
    if np.any(res <= 0):
        raise ConvergenceError("remainder vanished at some time; no power law to fit")
    slope = float(np.polyfit(np.log(times), np.log(res), 1)[0])
    return FirstOrderFit(times, res, slope, p0, mu)
