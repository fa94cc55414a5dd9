"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain where an operation is defined."""


class ConvergenceError(RuntimeError):
    """A numerical procedure did not reach its pinned tolerance."""
