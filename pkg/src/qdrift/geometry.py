"""Metric built from a payoff delta, connection coefficients, eigenfunctions.

On a buyer segment the metric is g = U0'; on a seller segment it is |U0'|
with orientation -1.  Neutral segments have no metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.integrate import quad

from .errors import DomainError
from .payoffs import Payoff, Segment, payoff_derivative, segment_delta


@dataclass(frozen=True)
class Metric:
    payoff: Payoff
    lo: float
    hi: float
    orientation: int = 1

    @property
    def segment(self) -> Segment:
        return Segment(self.lo, self.hi, self.orientation)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return (x > self.lo) & (x < self.hi)

    def derivative(self, x, order=0):
        """d^order g / dx^order inside the domain, zero outside."""
        x = np.asarray(x, dtype=float)
        val = self.orientation * payoff_derivative(self.payoff, x, order + 1)
        return np.where(self.contains(x), val, 0.0)

    def __call__(self, x):
        return self.derivative(x, 0)

    def dg(self, x):
        return self.derivative(x, 1)

    def d2g(self, x):
        return self.derivative(x, 2)

    def sqrt(self, x):
        return np.sqrt(np.maximum(self(x), 0.0))


def metric_from_payoff(p: Payoff, segment: Segment | None = None) -> Metric:
    """Metric on one delta segment (default: the first buyer/seller segment)."""
    if segment is None:
        active = segment_delta(p).active()
        if not active:
            raise DomainError("payoff has no segment with non-zero delta")
        segment = active[0]
    if segment.sign == 0:
        raise DomainError("the metric is undefined where the delta vanishes")
    return Metric(p, segment.lo, segment.hi, int(segment.sign))


def unit_metric() -> Metric:
    """g = 1 on the whole line (forward payoff)."""
    return Metric(Payoff("forward"), -math.inf, math.inf, 1)


@dataclass(frozen=True)
class ConnectionCoefficients:
    A: Callable
    dA: Callable
    Q: Callable
    convention: str


def connection_coefficients(g: Metric, convention: str = "displayed") -> ConnectionCoefficients:
    """Abelian connection A_x and section Q that flatten the general Laplacian.

    ``displayed``: A = -g^(1/2) d(g^(-1/2))/dx = g'/(2g), Q = -A^2/g - A'/g.
        These cancel the lower-order terms of the term-by-term expansion of
        the Laplacian.
    ``composed``: A = g'/(4g), Q = (A^2 - A')/g.  These cancel the lower-order
        terms when g^(-1/2)(d + A) g^(-1/2)(d + A) is composed literally.
    """
    if convention == "displayed":
        c = 0.5
    elif convention == "composed":
        c = 0.25
    else:
        raise DomainError(f"unknown convention {convention!r}")

    def A(x):
        return c * g.dg(x) / g(x)

    def dA(x):
        gx = g(x)
        return c * (g.d2g(x) * gx - g.dg(x) ** 2) / gx ** 2

    if convention == "displayed":
        def Q(x):
            return -(A(x) ** 2 + dA(x)) / g(x)
    else:
        def Q(x):
            return (A(x) ** 2 - dA(x)) / g(x)

    return ConnectionCoefficients(A, dA, Q, convention)


def _d1(n, h):
    return sp.diags([-0.5 / h, 0.5 / h], [-1, 1], shape=(n, n), format="csr")


def _d2(n, h):
    return sp.diags([1.0 / h ** 2, -2.0 / h ** 2, 1.0 / h ** 2], [-1, 0, 1], shape=(n, n), format="csr")


def laplacian_matrix(g: Metric, x, coeffs: ConnectionCoefficients, form: str = "composed"):
    """Finite-difference matrix of the general 1-D Laplacian.

    ``composed`` assembles g^(-1/2)(D1 + A) g^(-1/2)(D1 + A) + Q from
    central-difference factors; ``expanded`` assembles
    (1/g) D2 + (g^(-1/2) (g^(-1/2))' + A/g) D1 + (A^2/g + A'/g + Q).
    Rows near the boundary are not meaningful.
    """
    x = np.asarray(x, float)
    n, h = x.size, x[1] - x[0]
    gx = g(x)
    if np.any(gx <= 0):
        raise DomainError("grid leaves the metric domain")
    A = coeffs.A(x)
    rg = gx ** -0.5
    D1 = _d1(n, h)
    if form == "composed":
        F = sp.diags(rg) @ (D1 + sp.diags(A))
        return (F @ F + sp.diags(coeffs.Q(x))).tocsr()
    if form == "expanded":
        drg = -0.5 * gx ** -1.5 * g.dg(x)
        first = rg * drg + A / gx
        zeroth = (A ** 2 + coeffs.dA(x)) / gx + coeffs.Q(x)
        return (sp.diags(1.0 / gx) @ _d2(n, h) + sp.diags(first) @ D1 + sp.diags(zeroth)).tocsr()
    raise DomainError(f"unknown form {form!r}")


def laplacian_residual(g: Metric, x, coeffs: ConnectionCoefficients, phi, form: str = "composed",
                       margin: int = 2) -> float:
    """max |(Delta_g - (1/g) d^2) phi| over interior points, relative to max |phi''/g|."""
    x = np.asarray(x, float)
    h = x[1] - x[0]
    L = laplacian_matrix(g, x, coeffs, form)
    target = sp.diags(1.0 / g(x)) @ _d2(x.size, h)
    r = (L - target) @ phi
    ref = target @ phi
    sl = slice(margin, x.size - margin)
    return float(np.max(np.abs(r[sl])) / np.max(np.abs(ref[sl])))


def naive_eigenfunction(p: Payoff, lam: float, sigma: float, x: float) -> complex:
    """(U0')^(-1/2) exp(i lam/sigma^2 int_anchor^x ds / U0'(s)).

    The anchor is 0 when 0 lies in the closure of x's delta segment, otherwise
    the segment's finite end nearest to -infinity.
    """
    segs = segment_delta(p)
    seg = segs.locate(x)
    if seg.sign == 0:
        raise DomainError(f"delta vanishes at x={x}")
    if seg.lo <= 0.0 <= seg.hi:
        anchor = 0.0
    else:
        anchor = seg.lo if math.isfinite(seg.lo) else seg.hi
    d = float(payoff_derivative(p, x, 1))
    if d == 0.0:
        raise DomainError(f"delta vanishes at x={x}")
    a, b = sorted((anchor, x))
    if a < seg.lo or b > seg.hi:
        raise DomainError("integration path leaves the delta segment")
    inv = lambda s: 1.0 / float(payoff_derivative(p, s, 1))  # noqa: E731
    integral = quad(inv, anchor, x, epsabs=1e-13, epsrel=1e-12, limit=200)[0] if x != anchor else 0.0
    amp = complex(d) ** -0.5
    return amp * np.exp(1j * lam / sigma ** 2 * integral)


def geometric_eigenfunction(g: Metric, lam: float, sigma: float, x):
    """g^(-1/2) exp(i lam x / sigma^2)."""
    gx = g(x)
    if np.any(gx <= 0):
        raise DomainError("metric vanishes at the evaluation point")
    return gx ** -0.5 * np.exp(1j * lam * np.asarray(x, float) / sigma ** 2)


def eigen_residual(g: Metric, lam: float, sigma: float, x) -> float:
    """Residual of the metric-coordinate generator on the geometric eigenfunction.

    The generator is -i sigma^2 d/dx - i sigma^2 g'/(2g), discretized with
    central differences; boundary nodes are skipped.
    """
    x = np.asarray(x, float)
    h = x[1] - x[0]
    phi = geometric_eigenfunction(g, lam, sigma, x)
    dphi = (phi[2:] - phi[:-2]) / (2 * h)
    xi = x[1:-1]
    op = -1j * sigma ** 2 * dphi - 0.5j * sigma ** 2 * g.dg(xi) / g(xi) * phi[1:-1]
    return float(np.max(np.abs(op - lam * phi[1:-1])) / np.max(np.abs(phi)))
