"""Market wave-functions: closed-form chirped Gaussians and grid samples.

A closed-form state is

    psi(x) = (2 pi s^2)^(-1/4) exp(-(x - x0)^2 / (4 s^2))
             * exp(i alpha (x - x0)^2 / (2 sqrt(2) s^2)) * exp(i k0 x)

so that |psi|^2 is exactly the normal density N(x0, s^2) for every chirp
``alpha`` and boost ``k0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import erfc

from .errors import DomainError

SQRT2 = math.sqrt(2.0)

# Half-width (in units of sigma_s) used whenever a closed-form state has to be
# truncated to a finite interval.  |psi|^2 beyond 12 sigma is below 1e-31.
SUPPORT_SIGMAS = 12.0


@dataclass(frozen=True, eq=False)
class MarketState:
    kind: str
    x0: float = 0.0
    sigma_s: float = 1.0
    alpha: float = 0.0
    k0: float = 0.0
    x: np.ndarray | None = None
    psi: np.ndarray | None = None
    warnings: tuple[str, ...] = field(default=())

    @property
    def is_grid(self) -> bool:
        return self.kind == "grid"

    @property
    def chirp_rate(self) -> float:
        """Coefficient of (x - x0) in the phase gradient of a closed-form state."""
        return self.alpha / (SQRT2 * self.sigma_s ** 2)

    @cached_property
    def _spline(self):
        return CubicSpline(self.x, self.psi, bc_type="natural", extrapolate=False)

    def amplitude(self, x):
        """Evaluate psi(x).  Grid states are cubic-spline interpolated, zero outside."""
        x = np.asarray(x, dtype=float)
        if self.is_grid:
            out = self._spline(x)
            return np.where(np.isnan(out), 0.0, out)
        s2 = self.sigma_s ** 2
        d = x - self.x0
        env = (2.0 * np.pi * s2) ** -0.25 * np.exp(-d * d / (4.0 * s2))
        phase = 0.5 * self.chirp_rate * d * d + self.k0 * x
        return env * np.exp(1j * phase)

    def density(self, x):
        return np.abs(self.amplitude(x)) ** 2

    def phase_gradient(self, x):
        """Im(psi'/psi) for a closed-form state; the local momentum."""
        if self.is_grid:
            raise DomainError("phase_gradient is analytic only for closed-form states")
        return self.chirp_rate * (np.asarray(x, dtype=float) - self.x0) + self.k0

    def support(self, nsigma: float = SUPPORT_SIGMAS) -> tuple[float, float]:
        """Interval that carries all but a negligible part of the mass."""
        if self.is_grid:
            return float(self.x[0]), float(self.x[-1])
        return self.x0 - nsigma * self.sigma_s, self.x0 + nsigma * self.sigma_s

    def to_dict(self) -> dict:
        if self.is_grid:
            return {
                "kind": "grid",
                "x": self.x.tolist(),
                "re": self.psi.real.tolist(),
                "im": self.psi.imag.tolist(),
            }
        return {
            "kind": "gaussian",
            "x0": self.x0,
            "sigma_s": self.sigma_s,
            "alpha": self.alpha,
            "k0": self.k0,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MarketState":
        kind = data.get("kind")
        if kind == "gaussian":
            return make_gaussian(
                data.get("x0", 0.0), data["sigma_s"], data.get("alpha", 0.0), data.get("k0", 0.0)
            )
        if kind == "grid":
            psi = np.asarray(data["re"], float) + 1j * np.asarray(data["im"], float)
            return grid_state(data["x"], psi)
        raise DomainError(f"unknown state kind {kind!r}")


def make_gaussian(x0: float = 0.0, sigma_s: float = 0.2, alpha: float = 0.0, k0: float = 0.0) -> MarketState:
    """Chirped, boosted Gaussian whose density is N(x0, sigma_s^2)."""
    if not sigma_s > 0 or not math.isfinite(sigma_s):
        raise DomainError(f"sigma_s must be positive, got {sigma_s}")
    return MarketState("gaussian", float(x0), float(sigma_s), float(alpha), float(k0))


def grid_state(x, psi, warnings: tuple[str, ...] = ()) -> MarketState:
    x = np.asarray(x, dtype=float)
    psi = np.asarray(psi, dtype=complex)
    if x.ndim != 1 or x.shape != psi.shape:
        raise DomainError("grid abscissae and amplitudes must be 1-D arrays of equal length")
    if x.size < 2 or np.any(np.diff(x) <= 0):
        raise DomainError("grid abscissae must be strictly increasing")
    return MarketState("grid", x=x, psi=psi, warnings=tuple(warnings))


def _grid_norm2(state: MarketState) -> float:
    return float(np.trapezoid(np.abs(state.psi) ** 2, state.x))


def norm(state: MarketState) -> float:
    """L2 norm; trapezoid rule on grids, exact (= 1) for closed forms."""
    if state.is_grid:
        return math.sqrt(_grid_norm2(state))
    return 1.0


def normalize(state: MarketState) -> MarketState:
    if not state.is_grid:
        return state
    if not np.all(np.isfinite(state.psi)):
        raise DomainError("state amplitudes contain NaN or inf")
    n2 = _grid_norm2(state)
    if n2 <= 0.0:
        raise DomainError("cannot normalize a state with zero norm")
    return replace(state, psi=state.psi / math.sqrt(n2))


def conjugate(state: MarketState) -> MarketState:
    """Complex conjugate state; flips chirp and boost of closed forms."""
    if state.is_grid:
        return replace(state, psi=np.conj(state.psi))
    return replace(state, alpha=-state.alpha, k0=-state.k0)


def _grid_derivative(state: MarketState) -> np.ndarray:
    if state.x.size < 3:
        raise DomainError("grid momentum needs at least 3 points")
    return np.gradient(state.psi, state.x, edge_order=2)


def expected_momentum(state: MarketState) -> float:
    """Re <psi| -i d/dx |psi>, in inverse price units."""
    if not state.is_grid:
        return state.k0
    dpsi = _grid_derivative(state)
    return float(np.trapezoid(np.imag(np.conj(state.psi) * dpsi), state.x))


def position_mean(state: MarketState) -> float:
    if not state.is_grid:
        return state.x0
    return float(np.trapezoid(state.x * np.abs(state.psi) ** 2, state.x))


def state_variance(state: MarketState) -> float:
    if not state.is_grid:
        return state.sigma_s ** 2
    rho = np.abs(state.psi) ** 2
    mean = np.trapezoid(state.x * rho, state.x)
    return float(np.trapezoid((state.x - mean) ** 2 * rho, state.x))


def _mass_outside(state: MarketState, lo: float, hi: float) -> float:
    if state.is_grid:
        rho = np.abs(state.psi) ** 2
        inside = (state.x >= lo) & (state.x <= hi)
        total = np.trapezoid(rho, state.x)
        kept = np.trapezoid(np.where(inside, rho, 0.0), state.x)
        return float(max(total - kept, 0.0))
    s = state.sigma_s * SQRT2
    return 0.5 * float(erfc((state.x0 - lo) / s) + erfc((hi - state.x0) / s))


def to_grid(state: MarketState, x_min: float | None = None, x_max: float | None = None,
            n: int = 4097) -> MarketState:
    """Sample on a uniform grid and renormalize with the trapezoid rule.

    Default bounds are x0 +/- 10 sigma_s for closed forms and the source grid's
    own span for grid states (which are linearly interpolated).
    """
    if x_min is None or x_max is None:
        if state.is_grid:
            lo, hi = state.support()
        else:
            lo, hi = state.support(10.0)
        x_min = lo if x_min is None else x_min
        x_max = hi if x_max is None else x_max
    if not x_min < x_max:
        raise DomainError("x_min must be below x_max")
    if n < 16:
        raise DomainError("a grid needs at least 16 points")
    x = np.linspace(x_min, x_max, int(n))
    if state.is_grid:
        re = np.interp(x, state.x, state.psi.real, left=0.0, right=0.0)
        im = np.interp(x, state.x, state.psi.imag, left=0.0, right=0.0)
        psi = re + 1j * im
    else:
        psi = state.amplitude(x)
    warnings = list(state.warnings)
    lost = _mass_outside(state, x_min, x_max)
    if lost > 1e-6:
        warnings.append(f"truncation: {lost:.3e} of the mass lies outside [{x_min}, {x_max}]")
    return normalize(grid_state(x, psi, tuple(warnings)))
