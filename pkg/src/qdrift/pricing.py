"""Zeroth- and first-order prices, quantum drift and martingale checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.stats import norm

from .errors import ConvergenceError, DomainError
from .geometry import metric_from_payoff
from .payoffs import Payoff, kinks, payoff_derivative, payoff_value, segment_delta
from .spectral import ReturnDistribution, distribution_moments, eigen_transform
from .statespace import MarketState, expected_momentum, make_gaussian

# mu = SPECTRAL_DRIFT_CONSTANT / sigma^2 * int lam |psi~(lam/sigma^2)|^2 dlam.
# Plancherel with the unnormalised kernel gives 1/(2 pi); calibrate_spectral_constant
# recovers it from the commutator expectation.
SPECTRAL_DRIFT_CONSTANT = 1.0 / (2.0 * math.pi)

HORIZON_FRACTION = 0.1


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class HamiltonianSpec:
    """H = -(sigma_h^2 / 2) d^2/dx^2 + V(x)."""

    sigma_h: float
    potential: Callable = _zero
    dpotential: Callable = _zero
    v_constant: bool = True
    label: str = "none"

    def __post_init__(self):
        if not self.sigma_h > 0:
            raise DomainError("sigma_h must be positive")


def hamiltonian(sigma_h: float, potential: str = "none", strength: float = 0.0,
                centre: float = 0.0) -> HamiltonianSpec:
    """Hamiltonian with a named potential: none, linear or harmonic."""
    c, x0 = float(strength), float(centre)
    if potential == "none" or c == 0.0:
        return HamiltonianSpec(sigma_h)
    if potential == "linear":
        return HamiltonianSpec(sigma_h, lambda x: c * (np.asarray(x, float) - x0),
                               lambda x: c + _zero(x), False, f"linear:{c}")
    if potential == "harmonic":
        return HamiltonianSpec(sigma_h, lambda x: 0.5 * c * (np.asarray(x, float) - x0) ** 2,
                               lambda x: c * (np.asarray(x, float) - x0), False, f"harmonic:{c}")
    raise DomainError(f"unknown potential {potential!r}")


@dataclass(frozen=True)
class PriceExpansion:
    p0: float
    mu: float
    t: float = 0.0
    rate: float = 0.0
    order: int = 1
    horizon: float = math.inf
    mu_spectral: float | None = None
    notes: dict = field(default_factory=dict)

    def price(self, t: float | None = None) -> float:
        t = self.t if t is None else t
        return math.exp(-self.rate * t) * (self.p0 + self.mu * t)

    @property
    def value(self) -> float:
        return self.price()

    def to_dict(self) -> dict:
        return {
            "p0": self.p0,
            "mu_commutator": self.mu,
            "mu_spectral": self.mu_spectral,
            "t": self.t,
            "rate": self.rate,
            "order": self.order,
            "horizon": None if math.isinf(self.horizon) else self.horizon,
            "price": self.value,
        }


def _integrate(fun, state: MarketState, p: Payoff) -> float:
    lo, hi = state.support()
    pts = [k for k in kinks(p) if lo < k < hi]
    val, err = quad(fun, lo, hi, points=pts or None, limit=400, epsabs=1e-14, epsrel=1e-12)
    if not math.isfinite(val):
        raise ConvergenceError("integrand is not integrable against the state density")
    return val


def _bachelier(state: MarketState, p: Payoff) -> float | None:
    m, s, k = state.x0, state.sigma_s, p.strike
    d = (m - k) / s
    call = (m - k) * norm.cdf(d) + s * norm.pdf(d)
    if p.kind == "forward":
        return m - k
    if p.kind == "call":
        return call
    if p.kind == "put":
        return call - (m - k)
    if p.kind == "straddle":
        return 2.0 * call - (m - k)
    if p.kind == "floor":
        return (m - k) - call
    return None


def zeroth_price(state: MarketState, p: Payoff) -> float:
    """int U0(x) |psi(x)|^2 dx; Bachelier closed forms for Gaussian states."""
    if state.is_grid:
        val = float(np.trapezoid(payoff_value(p, state.x) * np.abs(state.psi) ** 2, state.x))
        if not math.isfinite(val):
            raise ConvergenceError("zeroth-order price diverges")
        return val
    closed = _bachelier(state, p)
    if closed is not None:
        return float(closed)
    return _integrate(lambda x: float(payoff_value(p, x) * state.density(x)), state, p)


def quantum_drift_commutator(state: MarketState, p: Payoff, H: HamiltonianSpec) -> float:
    """Re <psi| i[H, U0] |psi> = sigma^2 int U0'(x) Im(conj(psi) psi') dx.

    The U0'' part of the commutator contributes a purely imaginary term
    -(i sigma^2 / 2) int U0'' |psi|^2 and drops out of the real part, which is
    why kinked payoffs need no special treatment.  The potential commutes
    with U0 and never enters.
    """
    s2 = H.sigma_h ** 2
    if state.is_grid:
        if state.x.size < 3:
            raise DomainError("grid too small for a derivative")
        dpsi = np.gradient(state.psi, state.x, edge_order=2)
        current = np.imag(np.conj(state.psi) * dpsi)
        return s2 * float(np.trapezoid(payoff_derivative(p, state.x, 1) * current, state.x))

    def integrand(x):
        return float(payoff_derivative(p, x, 1) * state.density(x) * state.phase_gradient(x))

    return s2 * _integrate(integrand, state, p)


def segment_distributions(state: MarketState, p: Payoff, sigma_h: float, **kw) -> list[ReturnDistribution]:
    """One return distribution per buyer/seller segment of the payoff."""
    return [eigen_transform(state, metric_from_payoff(p, seg), sigma_h, **kw)
            for seg in segment_delta(p).active()]


def quantum_drift_spectral(d: ReturnDistribution | Sequence[ReturnDistribution],
                           constant: float = SPECTRAL_DRIFT_CONSTANT) -> float:
    """Orientation-weighted sum of constant / sigma^2 * int lam |psi~|^2 dlam."""
    dists = [d] if isinstance(d, ReturnDistribution) else list(d)
    total = 0.0
    for dist in dists:
        if not dist.tails_decayed:
            raise ConvergenceError("return distribution tails have not converged")
        total += dist.orientation * constant / dist.sigma_h ** 2 * dist.first_moment
    return total


def spectral_drift(state: MarketState, p: Payoff, H: HamiltonianSpec) -> float:
    return quantum_drift_spectral(segment_distributions(state, p, H.sigma_h))


def calibrate_spectral_constant(state: MarketState | None = None, sigma_h: float = 0.2) -> float:
    """Constant that makes the spectral drift equal the commutator drift.

    Uses the forward payoff, whose metric is g = 1, on a boosted Gaussian.
    """
    state = make_gaussian(0.0, 0.2, 0.0, 0.5) if state is None else state
    p = Payoff("forward")
    H = HamiltonianSpec(sigma_h)
    if abs(expected_momentum(state)) < 1e-8:
        raise DomainError("calibration needs a state with non-zero momentum")
    raw = quantum_drift_spectral(segment_distributions(state, p, sigma_h), constant=1.0)
    return quantum_drift_commutator(state, p, H) / raw


def first_order_price(state: MarketState, p: Payoff, H: HamiltonianSpec, t: float = 0.0,
                      r: float = 0.0, cross_check: bool = True) -> PriceExpansion:
    """exp(-r t) (p0 + mu t) with mu from the commutator expectation."""
    if t < 0:
        raise DomainError("t must be non-negative")
    p0 = zeroth_price(state, p)
    mu = quantum_drift_commutator(state, p, H)
    mu_s = spectral_drift(state, p, H) if cross_check and not state.is_grid else None
    horizon = math.inf if mu == 0.0 else HORIZON_FRACTION * abs(p0) / abs(mu)
    return PriceExpansion(p0, mu, float(t), float(r), 1, horizon, mu_s)


@dataclass(frozen=True)
class MartingaleReport:
    expected_momentum: float
    commutator_norm: float
    tol: float = 1e-10

    @property
    def arbitrage_free(self) -> bool:
        return abs(self.expected_momentum) <= self.tol and self.commutator_norm <= self.tol

    def to_dict(self) -> dict:
        return {"expected_momentum": self.expected_momentum,
                "commutator_norm": self.commutator_norm,
                "arbitrage_free": self.arbitrage_free}


def martingale_check(state: MarketState, H: HamiltonianSpec, n: int = 2001) -> MartingaleReport:
    """E[P] and sup |V'| over the state's effective support ([H, P] = -V')."""
    lo, hi = state.support(8.0)
    x = np.linspace(lo, hi, n)
    return MartingaleReport(expected_momentum(state), float(np.max(np.abs(H.dpotential(x)))))


@dataclass(frozen=True)
class SweepRow:
    sigma_h: float
    mu: float
    mean_lambda: float
    width: float
    width_ratio: float

    def to_dict(self) -> dict:
        return dict(sigma_h=self.sigma_h, mu=self.mu, mean_lambda=self.mean_lambda,
                    width=self.width, width_ratio=self.width_ratio)


def _combined(dists: list[ReturnDistribution]) -> ReturnDistribution:
    if len(dists) == 1:
        return dists[0]
    d0 = dists[0]
    dens = sum(d.density for d in dists)
    return ReturnDistribution(d0.lambdas, np.sqrt(dens).astype(complex), d0.sigma_h)


def classical_limit_sweep(state: MarketState, p: Payoff, sigmas: Iterable[float]) -> list[SweepRow]:
    """Drift and lambda-width across Hamiltonian volatilities.

    Every distribution is evaluated on the same wavenumber grid, so
    ``width_ratio`` (width / sigma_h^2 relative to the first row) is 1 exactly
    when the distribution depends on lam only through lam / sigma_h^2.
    """
    sigmas = [float(s) for s in sigmas]
    if not sigmas or min(sigmas) <= 0:
        raise DomainError("sigma_h values must be positive")
    segs = segment_delta(p).active()
    ref = [eigen_transform(state, metric_from_payoff(p, s), sigmas[0]) for s in segs]
    kmin = max(d.k[0] for d in ref)
    kmax = min(d.k[-1] for d in ref)
    n = min(d.k.size for d in ref)
    rows = []
    base = None
    for sig in sigmas:
        s2 = sig * sig
        dists = [eigen_transform(state, metric_from_payoff(p, s), sig, kmin * s2, kmax * s2, n, check_tails=False)
                 for s in segs]
        mean, var = distribution_moments(_combined(dists))
        width = math.sqrt(var)
        mu = quantum_drift_commutator(state, p, HamiltonianSpec(sig))
        base = width / s2 if base is None else base
        rows.append(SweepRow(sig, mu, mean, width, width / s2 / base))
    return rows
