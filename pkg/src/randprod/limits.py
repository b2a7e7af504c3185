"""Regime classification and the normalizing sequences of Z_n."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import DomainError
from .laws import LawKind, LimitLaw
from .ldev import an_expansion_c1, stable_bn, truncated_moment
from .rate import RateFunction

EQ_REL = 1e-9


class RegimeTag(str, Enum):
    SUPERCRITICAL = "Supercritical"
    CRITICAL = "Critical"
    STABLE_HIGH = "StableHigh"
    STABLE_BOUNDARY = "StableBoundary"
    STABLE_LOW = "StableLow"


STABLE_TAGS = (RegimeTag.STABLE_HIGH, RegimeTag.STABLE_BOUNDARY, RegimeTag.STABLE_LOW)


@dataclass(frozen=True)
class Regime:
    tag: RegimeTag
    alpha: float | None
    beta: float | None
    is_lattice: bool

    @property
    def is_stable(self) -> bool:
        return self.tag in STABLE_TAGS


@dataclass(frozen=True)
class Normalization:
    """``A_n``, ``B_n`` in log-space; ``b_n`` and ``delta_n`` where defined."""

    log_A: float
    log_B: float
    b_n: float | None = None
    delta_n: float | None = None


def _near(c, ci):
    return abs(c - ci) <= EQ_REL * max(1.0, abs(ci))


def _as_rf(model) -> RateFunction:
    return model if isinstance(model, RateFunction) else RateFunction(model)


def classify(model, c: float) -> Regime:
    """Limit regime of ``Z_n`` for ``N_n ~ e^{cn}``.

    ``|c - c_i| <= 1e-9 max(1, c_i)`` counts as ``c = c_i``.
    """
    if not c > 0:
        raise DomainError("c must be positive")
    rf = _as_rf(model)
    lat = rf.model.is_lattice
    if _near(c, rf.c2):
        return Regime(RegimeTag.CRITICAL, None, None, lat)
    if c > rf.c2:
        return Regime(RegimeTag.SUPERCRITICAL, None, None, lat)
    if _near(c, rf.c1):
        return Regime(RegimeTag.STABLE_BOUNDARY, 1.0, float(rf.model.dphi(1.0)), lat)
    alpha, beta = rf.alpha_of_c(c)
    tag = RegimeTag.STABLE_HIGH if c > rf.c1 else RegimeTag.STABLE_LOW
    return Regime(tag, alpha, beta, lat)


def lattice_delta(b_n: float, h: float) -> float:
    """``b_n - h floor(b_n / h)``, in ``[0, h)``."""
    d = b_n - h * math.floor(b_n / h)
    return 0.0 if d >= h else d


def normalization(model, c: float, n: int, N_n: int, c1_centering: str = "expansion") -> Normalization:
    """Centering and scaling of ``Z_n``.

    Args:
        model: a DistributionModel or RateFunction.
        c: growth exponent of ``N_n``.
        n: number of factors.
        N_n: number of summands.
        c1_centering: at ``c = c1`` on a non-lattice model, ``"expansion"``
            uses the closed-form expansion of ``A_n`` and ``"truncated"`` the
            exact truncated moment.  Lattice models always use the latter.
    """
    if n < 2:
        raise DomainError("n must be at least 2")
    if N_n < 1:
        raise DomainError("N_n must be at least 1")
    rf = _as_rf(model)
    m = rf.model
    reg = classify(rf, c)
    logN = math.log(N_n)
    p1, p2 = float(m.phi(1.0)), float(m.phi(2.0))
    if not reg.is_stable:
        log_A = logN + p1 * n
        # Var Z_n = N (e^{phi(2) n} - e^{2 phi(1) n}); phi(2) > 2 phi(1) by convexity
        log_B = 0.5 * (logN + p2 * n + math.log1p(-math.exp((2 * p1 - p2) * n)))
        return Normalization(log_A, log_B)
    alpha = reg.alpha
    b = stable_bn(rf, alpha, n)
    delta = lattice_delta(b, m.lattice.h) if m.is_lattice else None
    if reg.tag is RegimeTag.STABLE_LOW:
        log_A = -math.inf
    elif reg.tag is RegimeTag.STABLE_HIGH:
        log_A = logN + p1 * n
    elif c1_centering == "expansion" and not m.is_lattice:
        log_A = an_expansion_c1(m, n, N_n)
    elif c1_centering in ("expansion", "truncated"):
        mom = truncated_moment(m, 1.0, b, n, mode="exact")
        log_A = logN + p1 * n + math.log(mom) if mom > 0 else -math.inf
    else:
        raise DomainError(f"unknown c1_centering {c1_centering!r}")
    return Normalization(log_A, b, b, delta)


def limit_law(model, c: float, delta: float | None = None) -> LimitLaw:
    """Theoretical limit of the normalized ``Z_n``.

    For lattice models in a stable regime ``delta`` selects the subsequential
    limit (``Delta_n -> delta``).
    """
    rf = _as_rf(model)
    reg = classify(rf, c)
    if reg.tag is RegimeTag.SUPERCRITICAL:
        return LimitLaw(LawKind.NORMAL01)
    if reg.tag is RegimeTag.CRITICAL:
        return LimitLaw(LawKind.NORMAL_HALF)
    if not reg.is_lattice:
        return LimitLaw(LawKind.STABLE, alpha=reg.alpha)
    if delta is None:
        raise DomainError("lattice stable limits need Delta")
    return LimitLaw(LawKind.LATTICE_ID, alpha=reg.alpha, Delta=float(delta), h=rf.model.lattice.h)


def select_lattice_n(model, c: float, delta: float, n_min: int, window: float | None = None, n_max: int | None = None):
    """Smallest ``n >= n_min`` with ``|Delta_n - delta| < window``.

    ``window`` defaults to ``0.05 h``.  Distances are measured on the circle
    ``R / hZ`` so targets near 0 and h behave alike.
    """
    rf = _as_rf(model)
    m = rf.model
    if not m.is_lattice:
        raise DomainError("subsequence selection needs a lattice model")
    h = m.lattice.h
    win = 0.05 * h if window is None else window
    alpha, _ = rf.alpha_of_c(c)
    stop = n_min + 100_000 if n_max is None else n_max
    for n in range(max(2, n_min), stop + 1):
        d = lattice_delta(stable_bn(rf, alpha, n), h)
        gap = abs(d - delta) % h
        if min(gap, h - gap) < win:
            return n
    raise DomainError(f"no n in [{n_min}, {stop}] with Delta_n within {win} of {delta}")
