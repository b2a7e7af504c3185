"""Exception types raised across the package."""


class RandprodError(Exception):
    """Base class for all errors raised by randprod."""


class DomainError(RandprodError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class OffLatticeError(DomainError):
    """A lattice formula was evaluated at a point not on the lattice."""


class NTooSmallError(DomainError):
    """An asymptotic expansion is meaningless at this n (e.g. negative braces)."""


class ConvergenceError(RandprodError, ArithmeticError):
    """A root solver or series failed to converge within its iteration cap."""


class QuadratureError(RandprodError, ArithmeticError):
    """Numerical integration did not reach the requested accuracy."""


class UnsupportedError(RandprodError, NotImplementedError):
    """The requested operation is not available for this model or parameter."""


class BudgetExceededError(RandprodError, RuntimeError):
    """A simulation would exceed the configured operation budget."""
