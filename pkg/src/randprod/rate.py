"""Legendre-Fenchel rate function of a model and the critical points.

The rate function is ``I(beta) = sup_{t >= 0} (beta*t - phi(t))``.  For
``beta = phi'(a)`` with ``a > 0`` the supremum is attained at ``t = a``, so
everything reduces to inverting two strictly increasing functions of ``a``:
``phi'(a)`` and ``g(a) = a*phi'(a) - phi(a)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError
from .models import DistributionModel

REL_TOL = 1e-12
MAX_ITER = 200
BRACKET_LO = 1e-8


def _solve_increasing(f, df, target, rel_tol=REL_TOL, max_iter=MAX_ITER):
    """Root of ``f(a) = target`` for strictly increasing f on (0, inf).

    The bracket starts at ``[1e-8, 1]`` and grows geometrically until f
    straddles the target, then Newton steps are taken and rejected in favour
    of bisection whenever they leave the bracket.
    """
    lo, hi = BRACKET_LO, 1.0
    flo = f(lo) - target
    while flo > 0:
        hi, lo = lo, lo / 16
        if lo < 1e-300:
            raise ConvergenceError("target below the range of the function")
        flo = f(lo) - target
    fhi = f(hi) - target
    while fhi < 0:
        lo, flo = hi, fhi
        hi *= 2.0
        if hi > 1e300:
            raise ConvergenceError("target above the range of the function")
        fhi = f(hi) - target
    if fhi == 0:
        return hi
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = f(x) - target
        if fx == 0:
            return x
        if fx < 0:
            lo = x
        else:
            hi = x
        d = df(x)
        step = fx / d if d > 0 else math.inf
        x_new = x - step
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= rel_tol * abs(x_new) or hi - lo <= rel_tol * hi:
            return x_new
        x = x_new
    raise ConvergenceError(f"no convergence after {max_iter} iterations")


@dataclass
class RateFunction:
    """Rate function of ``model`` with its critical points cached."""

    model: DistributionModel
    c1: float = field(init=False)
    c2: float = field(init=False)
    c_inf: float = field(init=False)

    def __post_init__(self):
        m = self.model
        self.c1 = float(m.dphi(1.0) - m.phi(1.0))
        self.c2 = float(2.0 * m.dphi(2.0) - m.phi(2.0))
        self.c_inf = float(m.c_inf)

    def g(self, a):
        """``I(phi'(a)) = a*phi'(a) - phi(a)``."""
        m = self.model
        return a * m.dphi(a) - m.phi(a)

    def alpha_of_beta(self, beta: float) -> float:
        """The unique ``a > 0`` with ``phi'(a) = beta``."""
        m = self.model
        if not m.beta0 < beta < m.beta_inf:
            raise DomainError(f"beta={beta} outside ({m.beta0}, {m.beta_inf})")
        return _solve_increasing(m.dphi, m.d2phi, beta)

    def rate(self, beta: float) -> float:
        """``I(beta)``; +inf above the essential supremum."""
        m = self.model
        if beta <= m.beta0:
            raise DomainError(f"rate function needs beta > beta0={m.beta0}")
        if beta > m.beta_inf:
            return math.inf
        if beta == m.beta_inf:
            return self.c_inf
        a = self.alpha_of_beta(beta)
        return float(a * beta - m.phi(a))

    def rate_prime(self, beta: float) -> float:
        """``I'(beta)``, equal to ``alpha_of_beta(beta)``."""
        return self.alpha_of_beta(beta)

    def critical_points(self) -> tuple[float, float]:
        return self.c1, self.c2

    def alpha_of_c(self, c: float) -> tuple[float, float]:
        """Solve ``a*phi'(a) - phi(a) = c``; returns ``(a, phi'(a))``."""
        if not 0 < c < self.c_inf:
            raise DomainError(f"c={c} outside (0, c_inf={self.c_inf})")
        m = self.model
        a = _solve_increasing(self.g, lambda x: x * m.d2phi(x), c)
        return a, float(m.dphi(a))

    def rate_inverse(self, c: float) -> float:
        """``I^{-1}(c) = phi'(alpha_of_c(c))``."""
        return self.alpha_of_c(c)[1]

    def table(self, betas) -> list[tuple[float, float, float]]:
        """Rows ``(beta, I(beta), alpha)``; alpha is nan outside the open range."""
        rows = []
        m = self.model
        for b in np.asarray(betas, dtype=float):
            inside = m.beta0 < b < m.beta_inf
            rows.append((float(b), self.rate(b), self.alpha_of_beta(b) if inside else math.nan))
        return rows


def free_energy_limit(rf: RateFunction, c: float) -> float:
    """Limit of ``(1/n) log Z_n``: ``phi(1) + c`` for ``c >= c1``, else ``I^{-1}(c)``."""
    if c >= rf.c1:
        return float(rf.model.phi(1.0) + c)
    return rf.rate_inverse(c)
