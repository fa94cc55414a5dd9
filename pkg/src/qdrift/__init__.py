"""Heisenberg-picture derivative pricing with metric eigenfunction transforms."""

__version__ = "0.1.0"

from .errors import ConvergenceError, DomainError
from .payoffs import Payoff
from .pricing import HamiltonianSpec, first_order_price, quantum_drift_commutator, zeroth_price
from .statespace import MarketState, make_gaussian

__all__ = [
    "ConvergenceError",
    "DomainError",
    "HamiltonianSpec",
    "MarketState",
    "Payoff",
    "first_order_price",
    "make_gaussian",
    "quantum_drift_commutator",
    "zeroth_price",
]
