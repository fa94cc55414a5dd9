import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdrift.errors import DomainError
from qdrift.payoffs import (INF, Payoff, custom_payoff, decompose_monotone, kinks, payoff_delta,
                            payoff_derivative, payoff_gamma, payoff_value, segment_delta)

X = np.linspace(-2.0, 2.0, 81) + 0.0123  # avoids landing exactly on kinks


def test_vanilla_values():
    x = np.array([-1.0, 0.5, 2.0])
    assert np.allclose(payoff_value(Payoff("call", 0.5), x), [0.0, 0.0, 1.5])
    assert np.allclose(payoff_value(Payoff("put", 0.5), x), [1.5, 0.0, 0.0])
    assert np.allclose(payoff_value(Payoff("straddle", 0.5), x), [1.5, 0.0, 1.5])
    assert np.allclose(payoff_value(Payoff("forward", 0.5), x), x - 0.5)


@pytest.mark.parametrize("p", [Payoff("smooth_call", 0.2, beta=3.0), Payoff("exponential", 0.0, beta=0.7),
                               Payoff("forward", 1.0), custom_payoff([-1, 0, 1, 2], [0, 1, 0, 2])])
@pytest.mark.parametrize("order", [1, 2, 3])
def test_derivatives_against_finite_differences(p, order):
    h = 1e-4
    f0 = payoff_derivative(p, X + h, order - 1)
    f1 = payoff_derivative(p, X - h, order - 1)
    fd = (f0 - f1) / (2 * h)
    assert np.allclose(payoff_derivative(p, X, order), fd, atol=1e-5, rtol=1e-5)


def test_delta_flags_mark_kinks():
    d, flags = payoff_delta(Payoff("call", 0.0), np.array([-1.0, 0.0, 1.0]), return_flags=True)
    assert flags.tolist() == [False, True, False]
    assert d[2] == 1.0 and d[0] == 0.0


def test_digital_ramp():
    p = Payoff("digital", 0.0, epsilon=0.1)
    assert np.allclose(payoff_value(p, [-1.0, 0.05, 1.0]), [0.0, 0.5, 1.0])
    assert kinks(p) == (0.0, 0.1)
    assert np.allclose(payoff_gamma(p, [0.5]), 0.0)


def test_segments():
    segs = segment_delta(Payoff("straddle", 1.0))
    assert [(s.lo, s.hi, s.sign) for s in segs] == [(-INF, 1.0, -1), (1.0, INF, 1)]
    call = segment_delta(Payoff("call"))
    assert [s.sign for s in call.active()] == [1]
    assert call.locate(-3.0).sign == 0
    dig = segment_delta(Payoff("digital", 0.0, epsilon=0.2))
    assert [(s.lo, s.hi) for s in dig.active()] == [(0.0, 0.2)]


def test_custom_segments_follow_spline_monotonicity():
    p = custom_payoff([-1, 0, 1, 2], [0, 1, 0, 2])
    signs = [s.sign for s in segment_delta(p)]
    assert signs[0] == 1 and -1 in signs and signs[-1] == 1


@settings(max_examples=20, deadline=None)
@given(values=st.lists(st.floats(-2, 2), min_size=4, max_size=7))
def test_monotone_decomposition_reproduces_custom_payoff(values):
    nodes = np.arange(len(values), dtype=float)
    p = custom_payoff(nodes, values)
    x = np.linspace(-1, len(values), 97)
    parts = decompose_monotone(p)
    total = sum(sg * payoff_value(q, x) for q, sg in parts)
    assert np.allclose(total, payoff_value(p, x), atol=1e-9)
    for q, _ in parts:
        assert np.all(payoff_delta(q, x) >= -1e-9)


@pytest.mark.parametrize("kind", ["put", "straddle", "call"])
def test_monotone_decomposition_vanilla(kind):
    p = Payoff(kind, 0.3)
    total = sum(sg * payoff_value(q, X) for q, sg in decompose_monotone(p))
    assert np.allclose(total, payoff_value(p, X))


def test_bad_payoffs():
    with pytest.raises(DomainError):
        Payoff("binary")
    with pytest.raises(DomainError):
        Payoff("digital", epsilon=0.0)
    with pytest.raises(DomainError):
        custom_payoff([0, 0, 1], [1, 2, 3])
