"""Expansion of a market state over the metric eigenfunctions.

The return distribution is

    psi~(lam / sigma^2) = int sqrt(g(x)) psi(x) exp(-i lam x / sigma^2) dx

over the metric domain.  Everything is computed in the wavenumber
k = lam / sigma^2 and only rescaled at the end, so distributions for two
volatilities built on the same k-grid differ by an exact relabelling of lam.

The x-integral uses Gauss-Legendre panels with exact oscillatory moments:
on a panel of half-width h centred at c, sqrt(g) psi is expanded in Legendre
polynomials and

    int_{-1}^{1} P_m(u) exp(-i w u) du = 2 (-i)^m j_m(w),

so the kernel never needs to be resolved by the panels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import legder, legval
from scipy.integrate import quad
from scipy.special import eval_legendre, roots_legendre, spherical_jn

from .errors import ConvergenceError, DomainError
from .geometry import Metric
from .payoffs import kinks
from .statespace import MarketState, state_variance

CONVENTION = "ft-of-sqrt-g-psi, kernel e^{-i lambda x/sigma^2}, no 2pi prefactor"

LEGENDRE_ORDER = 16
PANEL_TOL = 1e-12
TAIL_DECAY = 1e-6
RESIDUAL_DECAY = 1e-12
MAX_PANELS = 8192
MAX_WIDENINGS = 12

_NODES, _WEIGHTS = roots_legendre(LEGENDRE_ORDER)
_PM = np.array([eval_legendre(m, _NODES) for m in range(LEGENDRE_ORDER)])
_NORM = (2 * np.arange(LEGENDRE_ORDER) + 1) / 2.0
_MOMENT_PHASE = 2.0 * (-1j) ** np.arange(LEGENDRE_ORDER)


@dataclass(frozen=True, eq=False)
class ReturnDistribution:
    lambdas: np.ndarray
    samples: np.ndarray
    sigma_h: float
    orientation: int = 1
    tail_mass: float = 0.0
    tail_moment: float = 0.0
    convention: str = CONVENTION
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> np.ndarray:
        return self.lambdas / self.sigma_h ** 2

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    @property
    def grid_mass(self) -> float:
        return float(np.trapezoid(self.density, self.lambdas))

    @property
    def mass(self) -> float:
        """int |psi~(lam/sigma^2)|^2 dlam, including the fitted tails."""
        return self.grid_mass + self.tail_mass

    @property
    def first_moment(self) -> float:
        """int lam |psi~(lam/sigma^2)|^2 dlam, including the fitted tails."""
        return float(np.trapezoid(self.lambdas * self.density, self.lambdas)) + self.tail_moment

    @property
    def tails_decayed(self) -> bool:
        d = self.density
        return bool(max(d[0], d[-1]) <= TAIL_DECAY * d.max())


def _panel_edges(a: float, b: float, forced: list[float], width: float) -> np.ndarray:
    pts = sorted({a, b, *[f for f in forced if a < f < b]})
    edges = []
    for lo, hi in zip(pts[:-1], pts[1:]):
        m = max(2, math.ceil((hi - lo) / width))
        edges.append(np.linspace(lo, hi, m + 1)[:-1])
    edges.append(np.array([b]))
    return np.concatenate(edges)


def _legendre_panels(f, a: float, b: float, forced: list[float], width: float):
    """Adaptive panels; returns (centres, half-widths, Legendre coefficients)."""
    while True:
        edges = _panel_edges(a, b, forced, width)
        c = 0.5 * (edges[:-1] + edges[1:])
        h = 0.5 * np.diff(edges)
        vals = f(c[:, None] + h[:, None] * _NODES[None, :])
        coef = (vals * _WEIGHTS) @ _PM.T * _NORM
        scale = max(np.max(np.abs(vals)), 1e-300)
        tail = np.max(np.abs(coef[:, -2:]))
        if tail <= PANEL_TOL * scale:
            return c, h, coef
        if c.size * 2 > MAX_PANELS:
            raise ConvergenceError("Legendre panels failed to resolve sqrt(g) psi")
        width /= 2.0


def _transform_k(c, h, coef, k: np.ndarray) -> np.ndarray:
    """Sum of exact panel integrals at wavenumbers k."""
    out = np.zeros(k.shape, dtype=complex)
    sign = (-1.0) ** np.arange(LEGENDRE_ORDER)
    keys = np.round(h / h.max(), 12)
    for key in np.unique(keys):
        sel = keys == key
        hw = float(h[sel].mean())
        w = np.abs(k) * hw
        J = np.stack([spherical_jn(m, w) for m in range(LEGENDRE_ORDER)], axis=1)
        J = np.where(k[:, None] < 0, J * sign, J) * _MOMENT_PHASE
        E = np.exp(-1j * np.outer(k, c[sel]))
        out += np.sum((E @ (h[sel, None] * coef[sel])) * J, axis=1)
    return out


JUMP_ORDERS = 3


def _panel_derivatives(h: float, coef: np.ndarray, u: float) -> np.ndarray:
    """f, f', f'' at local coordinate u (+-1) of one Legendre panel."""
    out = np.empty(JUMP_ORDERS, dtype=complex)
    c = coef
    for j in range(JUMP_ORDERS):
        out[j] = legval(u, c) / h ** j
        c = legder(c)
    return out


def _jumps(c, h, coef, points) -> tuple[np.ndarray, np.ndarray]:
    """Jumps f^(j)(x+) - f^(j)(x-) of the panel expansion at ``points``.

    ``points`` must be panel edges; f is zero outside the panels.
    """
    lo_edges, hi_edges = c - h, c + h
    xs, J = [], []
    for x in points:
        right = np.flatnonzero(np.isclose(lo_edges, x, rtol=0, atol=1e-12 * max(1.0, abs(x))))
        left = np.flatnonzero(np.isclose(hi_edges, x, rtol=0, atol=1e-12 * max(1.0, abs(x))))
        jr = _panel_derivatives(h[right[0]], coef[right[0]], -1.0) if right.size else 0.0
        jl = _panel_derivatives(h[left[0]], coef[left[0]], 1.0) if left.size else 0.0
        xs.append(x)
        J.append(jr - jl)
    return np.array(xs, float), np.array(J, dtype=complex).reshape(len(xs), JUMP_ORDERS)


@dataclass(frozen=True, eq=False)
class AsymptoticTail:
    """Large-|k| model of the transform of a piecewise-smooth f.

    Integrating by parts at every jump x_m of f, f', f'':

        psi~(k) ~ sum_m exp(-i k x_m) sum_j J_jm / (i k)^(j+1).
    """

    x: np.ndarray
    J: np.ndarray

    def _poly(self, m: int) -> np.ndarray:
        # coefficients of P_m in powers u = 1/k, index = power
        p = np.zeros(JUMP_ORDERS + 1, dtype=complex)
        p[1:] = self.J[m] * (-1j) ** np.arange(1, JUMP_ORDERS + 1)
        return p

    def amplitude(self, k) -> np.ndarray:
        k = np.asarray(k, float)
        u = 1.0 / k
        out = np.zeros(k.shape, dtype=complex)
        for m in range(self.x.size):
            out += np.exp(-1j * k * self.x[m]) * np.polynomial.polynomial.polyval(u, self._poly(m))
        return out

    def density(self, k) -> np.ndarray:
        return np.abs(self.amplitude(k)) ** 2

    def integrals(self, K: float) -> tuple[float, float]:
        """int_{|k|>K} |A|^2 dk and int_{|k|>K} k |A|^2 dk."""
        P = np.polynomial.polynomial
        mass = moment = 0.0
        sgn = (-1.0) ** np.arange(2 * JUMP_ORDERS + 1)
        for m in range(self.x.size):
            for n in range(self.x.size):
                c = P.polymul(self._poly(m), np.conj(self._poly(n)))  # c(k); c(-k) has coef * sgn
                c = np.pad(c, (0, 2 * JUMP_ORDERS + 1 - c.size))
                cm = c * sgn
                d = self.x[m] - self.x[n]
                # |A(k)|^2 + |A(-k)|^2 and k (|A(k)|^2 - |A(-k)|^2) per (m, n):
                # cos(k d) Re(c) + sin(k d) Im(c), with k -> -k for the mirror term
                parts = {
                    "mass_cos": (c + cm).real,
                    "mass_sin": (c - cm).imag,
                    "mom_cos": np.r_[(c - cm).real[1:], 0.0],
                    "mom_sin": np.r_[(c + cm).imag[1:], 0.0],
                }
                mass += _fourier_tail(parts["mass_cos"], parts["mass_sin"], d, K)
                moment += _fourier_tail(parts["mom_cos"], parts["mom_sin"], d, K)
        return float(mass), float(moment)


def _fourier_tail(ccos: np.ndarray, csin: np.ndarray, d: float, K: float) -> float:
    """int_K^inf [cos(k d) sum ccos_p k^-p + sin(k d) sum csin_p k^-p] dk."""
    P = np.polynomial.polynomial
    if abs(d) < 1e-14:
        # non-oscillatory: power laws, p >= 2 after symmetrisation
        if np.any(np.abs(ccos[:2]) > 1e-12 * max(np.abs(ccos).max(), 1e-300)):
            raise ConvergenceError("divergent tail term in the asymptotic model")
        p = np.arange(ccos.size)
        return float(np.sum(ccos[2:] * K ** (1.0 - p[2:]) / (p[2:] - 1.0)))
    sgn = 1.0 if d > 0 else -1.0
    total = 0.0
    for weight, coeffs, sign in (("cos", ccos, 1.0), ("sin", csin, sgn)):
        if not np.any(coeffs):
            continue
        val, _ = quad(lambda k: P.polyval(1.0 / k, coeffs), K, np.inf, weight=weight, wvar=abs(d), limlst=200)
        total += sign * val
    return total


def _tail_model(c, h, coef, a: float, b: float, forced) -> AsymptoticTail:
    pts = sorted({a, b, *[f for f in forced if a < f < b]})
    x, J = _jumps(c, h, coef, pts)
    scale = max(np.abs(coef[:, 0]).max(), 1e-300)
    keep = np.max(np.abs(J) * np.array([1.0, 1e-3, 1e-6]), axis=1) > 1e-14 * scale
    return AsymptoticTail(x[keep], J[keep])


def _tail_corrections(k: np.ndarray, model: AsymptoticTail) -> tuple[float, float]:
    """Mass and first moment of |psi~(k)|^2 beyond a symmetric k-window."""
    if model.x.size == 0:
        return 0.0, 0.0
    if k.size < 16 or not np.allclose(k, -k[::-1], rtol=0, atol=1e-12 * np.abs(k).max()):
        return 0.0, 0.0
    return model.integrals(float(k[-1]))


def _model_converged(k: np.ndarray, rho: np.ndarray, model: AsymptoticTail) -> bool:
    """Window ends are in the asymptotic regime and the residual density is negligible."""
    peak = rho.max()
    ends = np.array([k[0], k[-1]])
    resid = np.abs(np.array([rho[0], rho[-1]]) - model.density(ends)) if model.x.size else np.array([rho[0], rho[-1]])
    return bool(max(rho[0], rho[-1]) <= TAIL_DECAY * peak and resid.max() <= RESIDUAL_DECAY * peak)


def _integration_domain(state: MarketState, g: Metric) -> tuple[float, float]:
    lo, hi = state.support()
    a, b = max(lo, g.lo), min(hi, g.hi)
    if not b > a:
        raise DomainError("metric domain and state support do not overlap")
    return a, b


def _effective_width(state: MarketState) -> float:
    return math.sqrt(state_variance(state))


def _k_spread(state: MarketState) -> tuple[float, float]:
    """Centre and rough standard deviation of the state's momentum."""
    s = _effective_width(state)
    if state.is_grid:
        return 0.0, 4.0 / s
    spread = math.sqrt(0.25 + 0.5 * state.alpha ** 2) / s
    return state.k0, spread


def eigen_transform(state: MarketState, g: Metric, sigma_h: float,
                    lambda_min: float | None = None, lambda_max: float | None = None,
                    n: int | None = None, check_tails: bool = True) -> ReturnDistribution:
    """Return distribution of ``state`` for the metric ``g``.

    Without bounds the k-grid is symmetric, spaced by 0.1 / (state width),
    and doubled in extent until the density at both ends falls below 1e-6 of
    its peak.  Explicit bounds are used as given (``n`` points, default 2049).
    """
    if not sigma_h > 0:
        raise DomainError("sigma_h must be positive")
    a, b = _integration_domain(state, g)
    sqrt_g = g.sqrt

    def f(x):
        return sqrt_g(x) * state.amplitude(x)

    forced = [*kinks(g.payoff), *(g.payoff.breaks if g.payoff.kind == "custom" else ())]
    width = _effective_width(state)
    c, h, coef = _legendre_panels(f, a, b, forced, 0.5 * width)
    model = _tail_model(c, h, coef, a, b, forced)
    s2 = sigma_h ** 2

    if lambda_min is not None or lambda_max is not None:
        if lambda_min is None or lambda_max is None or not lambda_min < lambda_max:
            raise DomainError("give both lambda_min < lambda_max")
        n = 2049 if n is None else int(n)
        if n < 64:
            raise DomainError("a lambda grid needs at least 64 points")
        lam = np.linspace(lambda_min, lambda_max, n)
        k = lam / s2
        psi_t = _transform_k(c, h, coef, k)
        rho = np.abs(psi_t) ** 2
        if check_tails and max(rho[0], rho[-1]) > TAIL_DECAY * rho.max():
            raise ConvergenceError("return density has not decayed at the lambda-grid ends; widen the grid")
        tail_m, tail_k = _tail_corrections(k, model) if check_tails else (0.0, 0.0)
    else:
        k0, spread = _k_spread(state)
        dk = 0.1 / width
        K = abs(k0) + 8.0 * spread
        for _ in range(MAX_WIDENINGS):
            m = math.ceil(K / dk)
            k = dk * np.arange(-m, m + 1)
            psi_t = _transform_k(c, h, coef, k)
            rho = np.abs(psi_t) ** 2
            if _model_converged(k, rho, model):
                break
            K *= 2.0
        else:
            raise ConvergenceError("return density tails did not decay within the widening budget")
        tail_m, tail_k = _tail_corrections(k, model)
        lam = s2 * k

    return ReturnDistribution(
        lambdas=lam,
        samples=psi_t,
        sigma_h=float(sigma_h),
        orientation=g.orientation,
        tail_mass=s2 * tail_m,
        tail_moment=s2 * s2 * tail_k,
        meta={"domain": [a, b], "panels": int(c.size), "n": int(lam.size), "jumps": int(model.x.size)},
    )


def distribution_moments(d: ReturnDistribution) -> tuple[float, float]:
    """Mean and variance in lam of |psi~|^2 / m, trapezoid over the grid.

    Densities with algebraic tails have a window-dependent variance.
    """
    rho = d.density
    m = np.trapezoid(rho, d.lambdas)
    if not m > 0:
        raise DomainError("distribution has zero mass")
    mean = np.trapezoid(d.lambdas * rho, d.lambdas) / m
    var = np.trapezoid((d.lambdas - mean) ** 2 * rho, d.lambdas) / m
    return float(mean), float(var)


def weighted_mass(state: MarketState, g: Metric) -> float:
    """int g |psi|^2 dx over the metric domain (Legendre panels)."""
    a, b = _integration_domain(state, g)
    forced = [*kinks(g.payoff), *(g.payoff.breaks if g.payoff.kind == "custom" else ())]

    def f(x):
        return g(x) * state.density(x)

    c, h, coef = _legendre_panels(f, a, b, forced, 0.5 * _effective_width(state))
    return float(np.sum(2.0 * h * coef[:, 0].real))


def parseval_check(d: ReturnDistribution, state: MarketState, g: Metric) -> float:
    """Relative mismatch between m / (2 pi sigma^2) and int g |psi|^2 dx."""
    target = weighted_mass(state, g)
    return abs(d.mass / (2 * math.pi * d.sigma_h ** 2) - target) / target
