import numpy as np
import pytest

from qdrift.errors import DomainError
from qdrift.geometry import (connection_coefficients, eigen_residual, geometric_eigenfunction, laplacian_residual,
                             metric_from_payoff, naive_eigenfunction, unit_metric)
from qdrift.payoffs import Payoff, payoff_derivative, segment_delta


def test_call_metric_is_indicator():
    g = metric_from_payoff(Payoff("call"))
    assert np.allclose(g(np.array([-1.0, -1e-9, 1e-9, 3.0])), [0, 0, 1, 1])
    assert np.allclose(unit_metric()(np.array([-5.0, 5.0])), 1.0)


def test_seller_segment_is_oriented_positive():
    p = Payoff("straddle")
    seller = segment_delta(p).active()[0]
    g = metric_from_payoff(p, seller)
    assert g.orientation == -1
    assert np.allclose(g(np.array([-2.0, -0.1])), 1.0)
    assert np.allclose(g(np.array([0.1])), 0.0)


def test_neutral_segment_rejected():
    p = Payoff("call")
    with pytest.raises(DomainError):
        metric_from_payoff(p, segment_delta(p)[0])


def _smooth_metric():
    return metric_from_payoff(Payoff("smooth_call", 0.0, beta=2.0))


@pytest.mark.parametrize("convention,form", [("displayed", "expanded"), ("composed", "composed")])
def test_connection_flattens_laplacian(convention, form):
    g = _smooth_metric()
    errs = []
    for n in (401, 801):
        x = np.linspace(-2, 2, n)
        phi = np.cos(3 * x) + 0.5 * np.sin(x)
        errs.append(laplacian_residual(g, x, connection_coefficients(g, convention), phi, form=form))
    assert errs[1] < 1e-3
    assert errs[1] <= max(errs[0] / 3, 1e-12)  # exact, or O(h^2) discretisation error


def test_displayed_coefficients_do_not_flatten_composed_operator():
    g = _smooth_metric()
    x = np.linspace(-2, 2, 801)
    phi = np.cos(3 * x) + 0.5 * np.sin(x)
    assert laplacian_residual(g, x, connection_coefficients(g, "displayed"), phi, form="composed") > 1e-2


def test_unknown_convention():
    with pytest.raises(DomainError):
        connection_coefficients(unit_metric(), "other")


def test_naive_eigenfunction_solves_first_order_generator():
    # -i sigma^2 (U' psi' + U'' psi / 2) = lam psi
    p = Payoff("exponential", 0.0, beta=1.0)
    lam, sigma, h = 0.3, 0.2, 1e-5
    for x in (-0.5, 0.2, 0.7):
        f = lambda s: naive_eigenfunction(p, lam, sigma, s)  # noqa: E731
        dpsi = (f(x + h) - f(x - h)) / (2 * h)
        d1, d2 = payoff_derivative(p, x, 1), payoff_derivative(p, x, 2)
        lhs = -1j * sigma ** 2 * (d1 * dpsi + 0.5 * d2 * f(x))
        assert lhs == pytest.approx(lam * f(x), rel=1e-6)


def test_naive_eigenfunction_neutral_region():
    with pytest.raises(DomainError):
        naive_eigenfunction(Payoff("call"), 0.1, 0.2, -1.0)


def test_geometric_eigenfunction_residual_converges():
    g = _smooth_metric()
    r = [eigen_residual(g, 0.1, 0.2, np.linspace(-1, 1, n)) for n in (201, 401)]
    assert r[1] < r[0] / 3
    phi = geometric_eigenfunction(unit_metric(), 0.1, 0.2, np.array([0.0, 1.0]))
    assert np.allclose(np.abs(phi), 1.0)
