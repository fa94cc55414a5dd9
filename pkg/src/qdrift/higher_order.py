"""Second-order Liouvillian algebra, its Sturm-Liouville form and power series.

With H = a d^2/dx^2 and a = -(sigma^2/2) / U', nested commutators give

    [H, [H, U]] psi = c2 psi'' + c1 psi' + c0 psi        (no psi''' term)
    c2 = 4 a^2 U'' + 2 a a' U',   c1 = 2a (a U'')' + 2a (a U')'',   c0 = a (a U'')''.

Because a U' is constant these collapse to

    L^2 U psi = sigma^4 / (2 U') * [ (p psi')' + (p''/2) psi ],   p = U''/U',

so the eigenproblem L^2 U psi = lam psi is the Sturm-Liouville problem

    (p psi')' + q psi = Lam w psi,   q = p''/2,  w = U',  Lam = 2 lam / sigma^4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal
from scipy.special import roots_legendre

from .errors import ConvergenceError, DomainError
from .oracle import build_hamiltonian_grid, default_grid, on_grid
from .payoffs import Payoff, payoff_derivative, payoff_value
from .pricing import HamiltonianSpec
from .statespace import MarketState

SCAN_POINTS = 2001
OVERFLOW_GUARD = 1e150
MAX_SERIES_ORDER = 6

_GL_X, _GL_W = roots_legendre(16)


def _derivs(p: Payoff, x):
    """U', U'', U''', U'''' at x."""
    return tuple(payoff_derivative(p, x, k) for k in (1, 2, 3, 4))


def _p_and_derivatives(p: Payoff, x):
    """p = U''/U' and its first two derivatives."""
    d1, d2, d3, d4 = _derivs(p, x)
    pp = d2 / d1
    dp = d3 / d1 - pp * pp
    ddp = d4 / d1 - d3 * d2 / d1 ** 2 - 2.0 * pp * dp
    return pp, dp, ddp


@dataclass(frozen=True)
class L2Coefficients:
    c3: Callable
    c2: Callable
    c1: Callable
    c0: Callable
    sigma_h: float

    def apply(self, x, psi, dpsi, d2psi, d3psi=0.0):
        return self.c3(x) * d3psi + self.c2(x) * d2psi + self.c1(x) * dpsi + self.c0(x) * psi


def collect_l2_coefficients(p: Payoff, sigma_h: float) -> L2Coefficients:
    """Coefficients of psi''', psi'', psi', psi in [H, [H, U]] psi.

    Each is assembled from a = -(sigma^2/2)/U' and its derivatives exactly as
    collected from the nested commutator, without using a U' = const.
    """
    s2 = sigma_h ** 2

    def parts(x):
        x = np.asarray(x, dtype=float)
        d1, d2, d3, d4 = _derivs(p, x)
        if np.any(d1 == 0):
            raise DomainError("U' vanishes on the evaluation domain")
        a = -0.5 * s2 / d1
        da = 0.5 * s2 * d2 / d1 ** 2
        dda = 0.5 * s2 * (d3 / d1 ** 2 - 2.0 * d2 ** 2 / d1 ** 3)
        # (a U'')', (a U'')'', (a U')''
        aU2_1 = da * d2 + a * d3
        aU2_2 = dda * d2 + 2.0 * da * d3 + a * d4
        aU1_2 = dda * d1 + 2.0 * da * d2 + a * d3
        return a, da, d1, d2, aU2_1, aU2_2, aU1_2

    def c3(x):
        a, _, d1, *_ = parts(x)
        return 2.0 * a * a * d1 - 2.0 * a * a * d1

    def c2(x):
        a, da, d1, d2, *_ = parts(x)
        return 4.0 * a * a * d2 + 2.0 * a * da * d1

    def c1(x):
        a, _, _, _, aU2_1, _, aU1_2 = parts(x)
        return 2.0 * a * aU2_1 + 2.0 * a * aU1_2

    def c0(x):
        a, _, _, _, _, aU2_2, _ = parts(x)
        return a * aU2_2

    return L2Coefficients(c3, c2, c1, c0, float(sigma_h))


def _increments(p: Payoff, x: np.ndarray) -> np.ndarray:
    """U(x_j + h) - U(x_j) as integrals of U' over the nominal step h.

    Using the nominal step keeps the rounding jitter of the abscissae out of
    the second differences of U, which the stencil scales by 1/h^2.
    """
    h = (x[-1] - x[0]) / (x.size - 1)
    d1 = payoff_derivative(p, x[:-1, None] + 0.5 * h * (1.0 + _GL_X), 1)
    return 0.5 * h * np.sum(_GL_W * d1, axis=1)


def nested_commutator_grid(p: Payoff, sigma_h: float, x) -> sp.csr_matrix:
    """[H, [H, U]] on a uniform grid with H = diag(a) D2.

    With al_j = a_j / h^2 and d_j = U_{j+1} - U_j the inner commutator is
    B_{j,j+1} = al_j d_j, B_{j,j-1} = -al_j d_{j-1}, and the five bands of
    H B - B H are assembled in closed form so that nothing of size 1/h^4
    cancels in floating point.  The increments d_j are integrated from U'.
    """
    x = np.asarray(x, dtype=float)
    h = (x[-1] - x[0]) / (x.size - 1)
    d1 = payoff_derivative(p, x, 1)
    if np.any(d1 == 0):
        raise DomainError("U' vanishes on the grid")
    al = -0.5 * sigma_h ** 2 / d1 / h ** 2
    d = _increments(p, x)
    ad = al[:-1] * d  # al_j d_j
    up2 = al[:-2] * al[1:-1] * np.diff(d)  # M_{j,j+2}
    dn2 = al[2:] * al[1:-1] * np.diff(d)  # M_{j+2,j}
    up1 = 2.0 * ad * np.diff(al)  # M_{j,j+1}
    dn1 = 2.0 * al[1:] * d * np.diff(al)  # M_{j+1,j}
    diag = np.zeros_like(x)
    diag[:-1] -= 2.0 * al[:-1] * al[1:] * d
    diag[1:] += 2.0 * al[1:] * al[:-1] * d
    return sp.diags([dn2, dn1, diag, up1, up2], [-2, -1, 0, 1, 2], format="csr")


def l2_grid_residual(p: Payoff, sigma_h: float, x, tests, margin: int = 4) -> float:
    """max over test functions of the relative mismatch grid vs collected operator.

    ``tests`` is a list of (f, f', f'') callables.
    """
    x = np.asarray(x, dtype=float)
    M = nested_commutator_grid(p, sigma_h, x)
    co = collect_l2_coefficients(p, sigma_h)
    sl = slice(margin, x.size - margin)
    worst = 0.0
    for f, df, d2f in tests:
        grid = (M @ f(x))[sl]
        xi = x[sl]
        ref = co.apply(xi, f(xi), df(xi), d2f(xi))
        worst = max(worst, float(np.max(np.abs(grid - ref)) / np.max(np.abs(ref))))
    return worst


def random_test_functions(count: int = 5, seed: int = 0, modes: int = 3, max_freq: float = 3.0):
    """Smooth random test functions sum c_m sin(w_m x + phi_m) with their derivatives."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        c = rng.normal(size=modes)
        w = rng.uniform(0.5, max_freq, size=modes)
        ph = rng.uniform(0, 2 * math.pi, size=modes)

        def make(c=c, w=w, ph=ph):
            f = lambda x: np.sum(c * np.sin(np.multiply.outer(x, w) + ph), axis=-1)  # noqa: E731
            df = lambda x: np.sum(c * w * np.cos(np.multiply.outer(x, w) + ph), axis=-1)  # noqa: E731
            d2f = lambda x: -np.sum(c * w * w * np.sin(np.multiply.outer(x, w) + ph), axis=-1)  # noqa: E731
            return f, df, d2f

        out.append(make())
    return out


@dataclass(frozen=True)
class SLProblem:
    payoff: Payoff
    sigma_h: float
    a: float
    b: float
    boundary: str = "dirichlet"

    def p(self, x):
        return _p_and_derivatives(self.payoff, x)[0]

    def dp(self, x):
        return _p_and_derivatives(self.payoff, x)[1]

    def ddp(self, x):
        return _p_and_derivatives(self.payoff, x)[2]

    def q(self, x):
        return 0.5 * self.ddp(x)

    def w(self, x):
        return payoff_derivative(self.payoff, x, 1)

    def to_l2_eigenvalue(self, lam_sl):
        """lam of L^2 U from the Sturm-Liouville eigenparameter."""
        return 0.5 * self.sigma_h ** 4 * np.asarray(lam_sl)

    def apply(self, x, psi, dpsi, d2psi):
        """sigma^4/(2w) [(p psi')' + q psi] with the product rule expanded."""
        pp, dp, ddp = _p_and_derivatives(self.payoff, x)
        return 0.5 * self.sigma_h ** 4 / self.w(x) * (pp * d2psi + dp * dpsi + 0.5 * ddp * psi)


def _violations(mask: np.ndarray, x: np.ndarray) -> list[tuple[float, float]]:
    runs = []
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return runs
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.r_[idx[0], idx[breaks + 1]]
    ends = np.r_[idx[breaks], idx[-1]]
    return [(float(x[s]), float(x[e])) for s, e in zip(starts, ends)]


def build_sl_problem(p: Payoff, sigma_h: float, a: float, b: float) -> SLProblem:
    """Sturm-Liouville problem for L^2 U on [a, b]; needs U' > 0 and U'' > 0."""
    if not sigma_h > 0:
        raise DomainError("sigma_h must be positive")
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise DomainError("need a finite interval a < b")
    x = np.linspace(a, b, SCAN_POINTS)
    d1 = payoff_derivative(p, x, 1)
    d2 = payoff_derivative(p, x, 2)
    for name, bad in (("U'", d1 <= 0), ("U''", d2 <= 0)):
        runs = _violations(bad, x)
        if runs:
            lo, hi = runs[0]
            raise DomainError(f"{name} > 0 fails on [{lo:.6g}, {hi:.6g}] within [{a}, {b}]")
    return SLProblem(p, float(sigma_h), float(a), float(b))


@dataclass(frozen=True, eq=False)
class EigenResult:
    eigenvalues: np.ndarray  # Sturm-Liouville eigenparameter Lam, ascending
    l2_eigenvalues: np.ndarray  # lam = sigma^4 Lam / 2
    x: np.ndarray
    vectors: np.ndarray

    def to_dict(self) -> dict:
        return {"sl_eigenvalues": self.eigenvalues.tolist(),
                "l2_eigenvalues": self.l2_eigenvalues.tolist(),
                "n": int(self.x.size)}


def _smallest_modes(d, e, k):
    vals, vecs = eigh_tridiagonal(d, e)
    order = np.argsort(np.abs(vals))[:k]
    order = order[np.argsort(vals[order])]
    return vals[order], vecs[:, order]


def sl_eigensolve(sl: SLProblem, n: int = 512, k: int = 3) -> EigenResult:
    """Dirichlet FD eigenpairs of (p psi')' + q psi = Lam w psi, smallest |Lam|.

    Symmetric three-point discretisation on n interior nodes; the generalised
    problem A v = Lam W v is reduced with W^(-1/2).
    """
    if n < 128:
        raise DomainError("n must be at least 128")
    if not 1 <= k <= n:
        raise DomainError("k must be between 1 and n")
    h = (sl.b - sl.a) / (n + 1)
    x = sl.a + h * np.arange(1, n + 1)
    xm = sl.a + h * (np.arange(n + 1) + 0.5)
    pm = sl.p(xm)
    w = sl.w(x)
    if np.any(w <= 0):
        raise DomainError("weight U' is not positive definite on the domain")
    diag = -(pm[:-1] + pm[1:]) / h ** 2 + sl.q(x)
    off = pm[1:-1] / h ** 2
    rw = 1.0 / np.sqrt(w)
    vals, vecs = _smallest_modes(diag * rw * rw, off * rw[:-1] * rw[1:], k)
    vecs = vecs * rw[:, None]
    return EigenResult(vals, sl.to_l2_eigenvalue(vals), x, vecs)


def sl_matrices(sl: SLProblem, n: int):
    """(A, W) of the discretisation used by sl_eigensolve, as sparse matrices."""
    h = (sl.b - sl.a) / (n + 1)
    x = sl.a + h * np.arange(1, n + 1)
    xm = sl.a + h * (np.arange(n + 1) + 0.5)
    pm = sl.p(xm)
    diag = -(pm[:-1] + pm[1:]) / h ** 2 + sl.q(x)
    off = pm[1:-1] / h ** 2
    A = sp.diags([off, diag, off], [-1, 0, 1], format="csr")
    return A, sp.diags(sl.w(x), format="csr")


@dataclass(frozen=True, eq=False)
class WKBForm:
    """phi = h psi, s = int_a^x U'/sqrt(U'') dx;  phi_ss = (Q(s) + Lam) phi."""

    sl: SLProblem
    x: np.ndarray
    s: np.ndarray
    h: np.ndarray
    q_nodes: np.ndarray

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def x_of_s(self, s):
        return CubicSpline(self.s, self.x)(s)

    def Q(self, s):
        return liouville_potential(self.sl, self.x_of_s(s))


def liouville_potential(sl: SLProblem, x):
    """Q = h_ss / h - q / w, with the s-derivatives taken by the chain rule."""
    x = np.asarray(x, dtype=float)
    d1, d2, d3, d4 = _derivs(sl.payoff, x)
    h = d2 ** 0.25
    hx = 0.25 * d2 ** -0.75 * d3
    hxx = 0.25 * (d2 ** -0.75 * d4 - 0.75 * d2 ** -1.75 * d3 ** 2)
    r = d1 / np.sqrt(d2)
    rx = np.sqrt(d2) - 0.5 * d1 * d2 ** -1.5 * d3
    hss = hxx / r ** 2 - hx * rx / r ** 3
    return hss / h - sl.q(x) / d1


def liouville_transform(sl: SLProblem, nodes: int = 2049) -> WKBForm:
    """Liouville normal form of the problem; s is anchored at the left end."""
    x = np.linspace(sl.a, sl.b, nodes)
    lo, hi = x[:-1], x[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    pts = mid[:, None] + half[:, None] * _GL_X
    d1 = payoff_derivative(sl.payoff, pts, 1)
    d2 = payoff_derivative(sl.payoff, pts, 2)
    inc = half * np.sum(_GL_W * d1 / np.sqrt(d2), axis=1)
    s = np.concatenate([[0.0], np.cumsum(inc)])
    if not np.all(np.diff(s) > 0):
        raise ConvergenceError("s(x) is not strictly increasing")
    h = payoff_derivative(sl.payoff, x, 2) ** 0.25
    return WKBForm(sl, x, s, h, liouville_potential(sl, x))


def transformed_eigensolve(form: WKBForm, n: int = 512, k: int = 3) -> EigenResult:
    """Dirichlet FD eigenpairs of phi_ss - Q phi = Lam phi on [0, S]."""
    if n < 128:
        raise DomainError("n must be at least 128")
    hs = form.length / (n + 1)
    s = hs * np.arange(1, n + 1)
    Q = form.Q(s)
    diag = -2.0 / hs ** 2 - Q
    off = np.full(n - 1, 1.0 / hs ** 2)
    vals, vecs = _smallest_modes(diag, off, k)
    return EigenResult(vals, form.sl.to_l2_eigenvalue(vals), form.x_of_s(s), vecs)


def power_series_expectation(state: MarketState, p: Payoff, H: HamiltonianSpec, t, k_max: int,
                             x=None) -> np.ndarray | float:
    """Re sum_k (i t)^k / k! <psi| L^k U0 |psi> with grid nested commutators."""
    if not 0 <= k_max <= MAX_SERIES_ORDER:
        raise DomainError(f"k_max must be between 0 and {MAX_SERIES_ORDER}")
    if x is None:
        x = default_grid(state, n=1025)
    Hg = build_hamiltonian_grid(H, x)
    s = on_grid(state, Hg)
    hx = Hg.h
    Hm = Hg.matrix().astype(float)
    C = sp.diags(payoff_value(p, Hg.x), format="csc")
    psi = s.psi
    moments = []
    for k in range(k_max + 1):
        if k:
            C = (Hm @ C - C @ Hm).tocsc()
            size = abs(C).max()
            if not np.isfinite(size) or size > OVERFLOW_GUARD:
                raise ConvergenceError(f"L^{k} U0 grew to {size:.3e}; lower k_max or coarsen the grid")
        moments.append(hx * np.vdot(psi, C @ psi))
    t_arr = np.asarray(t, dtype=float)
    total = np.zeros(t_arr.shape, dtype=complex)
    for k, m in enumerate(moments):
        total = total + (1j * t_arr) ** k / math.factorial(k) * m
    out = total.real
    return float(out) if out.ndim == 0 else out
