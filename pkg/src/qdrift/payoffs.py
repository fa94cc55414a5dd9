"""European payouts U0(x), their derivatives and delta-sign segmentation.

Built-in kinds:

    forward       x - K
    call          max(x - K, 0)
    put           max(K - x, 0)
    straddle      |x - K|
    floor         min(x - K, 0)         (monotone piece of a short put)
    digital       ramp from 0 to 1 over [K, K + epsilon]
    smooth_call   log(1 + exp(beta (x - K))) / beta
    exponential   exp(beta (x - K)) / beta
    custom        piecewise cubic, linear beyond its end nodes

At kinks the derivatives take their right limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline, PPoly
from scipy.special import expit

from .errors import DomainError

KINDS = ("forward", "call", "put", "straddle", "floor", "digital", "smooth_call", "exponential", "custom")
SMOOTH_KINDS = ("forward", "smooth_call", "exponential")

INF = math.inf


@dataclass(frozen=True)
class Payoff:
    kind: str
    strike: float = 0.0
    epsilon: float = 1e-3
    beta: float = 1.0
    # custom payoffs: PPoly breakpoints/coefficients (highest power first)
    breaks: tuple[float, ...] = ()
    coeffs: tuple[tuple[float, ...], ...] = ()
    left_slope: float = 0.0
    right_slope: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown payoff kind {self.kind!r}")
        if self.kind == "digital" and not self.epsilon > 0:
            raise DomainError("digital ramp width must be positive")
        if self.kind in ("smooth_call", "exponential") and not self.beta > 0:
            raise DomainError("beta must be positive")
        if self.kind == "custom" and len(self.breaks) < 2:
            raise DomainError("custom payoff needs at least two breakpoints")

    @cached_property
    def ppoly(self) -> PPoly:
        return PPoly(np.array(self.coeffs, dtype=float), np.array(self.breaks, dtype=float))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "strike": self.strike}
        if self.kind == "digital":
            out["epsilon"] = self.epsilon
        if self.kind in ("smooth_call", "exponential"):
            out["beta"] = self.beta
        if self.kind == "custom":
            out.update(breaks=list(self.breaks), coeffs=[list(c) for c in self.coeffs],
                       left_slope=self.left_slope, right_slope=self.right_slope)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Payoff":
        kind = data["kind"]
        if kind == "custom" and "nodes" in data:
            return custom_payoff(data["nodes"], data["values"])
        kw = {k: data[k] for k in ("strike", "epsilon", "beta", "left_slope", "right_slope") if k in data}
        if kind == "custom":
            kw["breaks"] = tuple(float(b) for b in data["breaks"])
            kw["coeffs"] = tuple(tuple(float(v) for v in row) for row in data["coeffs"])
        return cls(kind, **kw)


def forward(strike=0.0):
    return Payoff("forward", strike)


def call(strike=0.0):
    return Payoff("call", strike)


def put(strike=0.0):
    return Payoff("put", strike)


def straddle(strike=0.0):
    return Payoff("straddle", strike)


def floor(strike=0.0):
    return Payoff("floor", strike)


def digital(strike=0.0, epsilon=1e-3):
    return Payoff("digital", strike, epsilon=epsilon)


def smooth_call(strike=0.0, beta=1.0):
    return Payoff("smooth_call", strike, beta=beta)


def exponential(strike=0.0, beta=1.0):
    return Payoff("exponential", strike, beta=beta)


def _ppoly_payoff(pp: PPoly, left_slope: float, right_slope: float) -> Payoff:
    return Payoff(
        "custom",
        breaks=tuple(float(b) for b in pp.x),
        coeffs=tuple(tuple(float(v) for v in row) for row in pp.c),
        left_slope=float(left_slope),
        right_slope=float(right_slope),
    )


def custom_payoff(nodes, values) -> Payoff:
    """Natural cubic spline through (nodes, values), extended linearly."""
    nodes = np.asarray(nodes, float)
    values = np.asarray(values, float)
    if nodes.size < 2 or np.any(np.diff(nodes) <= 0):
        raise DomainError("custom payoff nodes must be strictly increasing")
    spl = CubicSpline(nodes, values, bc_type="natural")
    pp = PPoly(spl.c, spl.x)
    d = pp.derivative()
    return _ppoly_payoff(pp, float(d(nodes[0])), float(d(nodes[-1])))


def kinks(p: Payoff) -> tuple[float, ...]:
    """Points where the payoff's first derivative jumps."""
    if p.kind in ("call", "put", "straddle", "floor"):
        return (p.strike,)
    if p.kind == "digital":
        return (p.strike, p.strike + p.epsilon)
    return ()


def _custom_derivative(p: Payoff, x: np.ndarray, order: int) -> np.ndarray:
    pp = p.ppoly
    a, b = pp.x[0], pp.x[-1]
    inside = (x >= a) & (x <= b)
    xi = np.clip(x, a, b)
    if order == 0:
        val = pp(xi)
        left = pp(a) + p.left_slope * (x - a)
        right = pp(b) + p.right_slope * (x - b)
    elif order == 1:
        val = pp.derivative(1)(xi)
        left = np.full_like(x, p.left_slope)
        right = np.full_like(x, p.right_slope)
    else:
        val = pp.derivative(order)(xi) if order <= 3 else np.zeros_like(x)
        left = right = np.zeros_like(x)
    return np.where(inside, val, np.where(x < a, left, right))


def payoff_derivative(p: Payoff, x, order: int = 0):
    """d^order U0 / dx^order, analytic for every kind (order <= 4)."""
    x = np.asarray(x, dtype=float)
    k = p.strike
    z = x - k
    zero = np.zeros_like(x)
    if p.kind == "custom":
        return _custom_derivative(p, x, order)
    if p.kind == "smooth_call":
        b = p.beta
        s = expit(b * z)
        if order == 0:
            return np.logaddexp(0.0, b * z) / b
        q = s * (1.0 - s)
        return (s, b * q, b ** 2 * q * (1.0 - 2.0 * s), b ** 3 * q * (1.0 - 6.0 * s + 6.0 * s * s))[order - 1]
    if p.kind == "exponential":
        b = p.beta
        return b ** (order - 1) * np.exp(b * z)
    if order >= 2:
        return zero
    if p.kind == "forward":
        return z if order == 0 else zero + 1.0
    if p.kind == "call":
        return np.maximum(z, 0.0) if order == 0 else (z >= 0).astype(float)
    if p.kind == "put":
        return np.maximum(-z, 0.0) if order == 0 else -(z < 0).astype(float)
    if p.kind == "straddle":
        return np.abs(z) if order == 0 else np.where(z >= 0, 1.0, -1.0)
    if p.kind == "floor":
        return np.minimum(z, 0.0) if order == 0 else (z < 0).astype(float)
    if p.kind == "digital":
        e = p.epsilon
        if order == 0:
            return np.clip(z / e, 0.0, 1.0)
        return ((z >= 0) & (z < e)).astype(float) / e
    raise DomainError(f"unsupported payoff kind {p.kind!r}")


def payoff_value(p: Payoff, x):
    return payoff_derivative(p, x, 0)


def payoff_delta(p: Payoff, x, return_flags: bool = False):
    """First derivative; right limit at kinks, optionally with a kink mask."""
    d = payoff_derivative(p, x, 1)
    if not return_flags:
        return d
    xa = np.asarray(x, dtype=float)
    flags = np.zeros(xa.shape, dtype=bool)
    for kk in kinks(p):
        flags |= xa == kk
    return d, flags


def payoff_gamma(p: Payoff, x):
    return payoff_derivative(p, x, 2)


@dataclass(frozen=True)
class Segment:
    lo: float
    hi: float
    sign: int

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x > self.lo) & (x < self.hi)

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "sign": self.sign}


@dataclass(frozen=True)
class DeltaSegmentation:
    segments: tuple[Segment, ...]

    def __iter__(self):
        return iter(self.segments)

    def __len__(self):
        return len(self.segments)

    def __getitem__(self, i):
        return self.segments[i]

    def active(self) -> tuple[Segment, ...]:
        """Buyer and seller segments; neutral ones carry no metric."""
        return tuple(s for s in self.segments if s.sign != 0)

    def locate(self, x: float) -> Segment:
        for s in self.segments:
            if s.lo <= x < s.hi or (x == s.hi == INF):
                return s
        raise DomainError(f"{x} lies in no segment")


def _merge(points: list[float], signs: list[int]) -> DeltaSegmentation:
    segs: list[Segment] = []
    for lo, hi, sg in zip(points[:-1], points[1:], signs):
        if hi <= lo:
            continue
        if segs and segs[-1].sign == sg:
            segs[-1] = Segment(segs[-1].lo, hi, sg)
        else:
            segs.append(Segment(lo, hi, sg))
    return DeltaSegmentation(tuple(segs))


def _custom_refined(p: Payoff) -> tuple[np.ndarray, np.ndarray]:
    """Breakpoints refined by the roots of U0', and the delta sign on each piece."""
    pp = p.ppoly
    d = pp.derivative()
    roots = d.roots(extrapolate=False)
    roots = roots[np.isfinite(roots)]
    pts = np.unique(np.concatenate([pp.x, roots]))
    mids = 0.5 * (pts[:-1] + pts[1:])
    vals = d(mids)
    if not np.all(np.isfinite(vals)):
        raise DomainError("could not determine the delta sign pattern of the custom payoff")
    scale = max(np.max(np.abs(vals)), abs(p.left_slope), abs(p.right_slope), 1e-300)
    signs = np.where(np.abs(vals) <= 1e-12 * scale, 0, np.sign(vals)).astype(int)
    return pts, signs


def segment_delta(p: Payoff) -> DeltaSegmentation:
    """Partition the real line into buyer (+1), neutral (0) and seller (-1) pieces."""
    k = p.strike
    if p.kind in SMOOTH_KINDS:
        return DeltaSegmentation((Segment(-INF, INF, 1),))
    if p.kind == "call":
        return _merge([-INF, k, INF], [0, 1])
    if p.kind == "put":
        return _merge([-INF, k, INF], [-1, 0])
    if p.kind == "straddle":
        return _merge([-INF, k, INF], [-1, 1])
    if p.kind == "floor":
        return _merge([-INF, k, INF], [1, 0])
    if p.kind == "digital":
        return _merge([-INF, k, k + p.epsilon, INF], [0, 1, 0])
    pts, signs = _custom_refined(p)
    sgn = lambda v: int(np.sign(v)) if v != 0 else 0  # noqa: E731
    return _merge([-INF, *pts.tolist(), INF], [sgn(p.left_slope), *signs.tolist(), sgn(p.right_slope)])


def _custom_monotone_parts(p: Payoff) -> list[tuple[Payoff, int]]:
    pp = p.ppoly
    pts, signs = _custom_refined(p)
    d = pp.derivative()
    left = pts[:-1]
    # Taylor coefficients of the quadratic U0' at each refined left break
    c = np.vstack([d(left, 2) / 2.0, d(left, 1), d(left)])
    out = []
    for sg in (1, -1):
        mask = signs == sg
        part = PPoly(np.where(mask, sg * c, 0.0), pts).antiderivative()
        ls = max(sg * p.left_slope, 0.0)
        rs = max(sg * p.right_slope, 0.0)
        if sg == 1:
            part.c[-1] += pp(pts[0])
        if sg == -1 and not mask.any() and ls == 0 and rs == 0:
            continue
        out.append((_ppoly_payoff(part, ls, rs), sg))
    return out


def decompose_monotone(p: Payoff) -> list[tuple[Payoff, int]]:
    """Signed pieces with non-negative delta whose sum reproduces U0."""
    k = p.strike
    if p.kind == "put":
        return [(floor(k), -1)]
    if p.kind == "straddle":
        return [(call(k), 1), (floor(k), -1)]
    if p.kind == "custom":
        return _custom_monotone_parts(p)
    return [(p, 1)]
