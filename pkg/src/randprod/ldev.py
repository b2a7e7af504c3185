"""Precise large deviations for partial sums and the estimators that check them.

All probabilities are carried as logarithms; ``exp`` is only taken when a
result is handed back to the caller.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import norm

from .errors import DomainError, NTooSmallError, OffLatticeError, UnsupportedError
from .models import DistributionModel
from .rate import RateFunction
from .streams import substream

IS_BLOCK = 8192
OFF_LATTICE_TOL = 1e-9


class TailKind(str, Enum):
    NON_LATTICE_TAIL = "NonLatticeTail"
    LATTICE_POINT_MASS = "LatticePointMass"
    LATTICE_TAIL = "LatticeTail"
    CHERNOFF_BOUND = "ChernoffBound"


@dataclass(frozen=True)
class TailAsymptotic:
    log_value: float
    n: int
    beta: float
    alpha: float
    kind: TailKind

    @property
    def value(self) -> float:
        return math.exp(self.log_value)


@dataclass(frozen=True)
class ISEstimate:
    mean: float
    stderr: float
    reps: int
    seed: int

    @property
    def rel_err(self) -> float:
        return self.stderr / self.mean if self.mean > 0 else math.inf


def _rf(model) -> RateFunction:
    return model if isinstance(model, RateFunction) else RateFunction(model)


def bahadur_rao_tail(model, beta: float, n: int) -> TailAsymptotic:
    """``P[S_n >= n beta] ~ e^{-n I(beta)} / (alpha sqrt(2 pi phi''(alpha) n))`` (non-lattice)."""
    rf = _rf(model)
    m = rf.model
    if m.is_lattice:
        raise DomainError("bahadur_rao_tail needs a non-lattice model; use lattice_tail")
    a = rf.alpha_of_beta(beta)
    log_v = -n * rf.rate(beta) - math.log(a) - 0.5 * math.log(2 * math.pi * m.d2phi(a) * n)
    return TailAsymptotic(log_v, n, beta, a, TailKind.NON_LATTICE_TAIL)


def _lattice_setup(model, beta, n):
    rf = _rf(model)
    m = rf.model
    if not m.is_lattice:
        raise DomainError("lattice formula needs a lattice model")
    h = m.lattice.h
    k = n * beta / h
    if abs(k - round(k)) > OFF_LATTICE_TOL * max(1.0, abs(k)):
        raise OffLatticeError(f"n*beta={n * beta} is not on the lattice {h}Z")
    if abs(beta - m.beta0) <= OFF_LATTICE_TOL * max(1.0, abs(beta)):
        # local limit theorem at the mean: alpha = 0, I = 0
        a, rate = 0.0, 0.0
    else:
        a, rate = rf.alpha_of_beta(beta), rf.rate(beta)
    log_mass = math.log(h) - n * rate - 0.5 * math.log(2 * math.pi * m.d2phi(a) * n)
    return a, h, log_mass


def lattice_point_mass(model, beta: float, n: int) -> TailAsymptotic:
    """``P[S_n = n beta] ~ h e^{-n I(beta)} / sqrt(2 pi phi''(alpha) n)``."""
    a, _, log_mass = _lattice_setup(model, beta, n)
    return TailAsymptotic(log_mass, n, beta, a, TailKind.LATTICE_POINT_MASS)


def lattice_tail(model, beta: float, n: int) -> TailAsymptotic:
    """Lattice tail: the point mass times ``1 / (1 - e^{-alpha h})``."""
    a, h, log_mass = _lattice_setup(model, beta, n)
    if a == 0:
        raise DomainError("lattice_tail needs beta above the mean")
    return TailAsymptotic(log_mass - math.log(-math.expm1(-a * h)), n, beta, a, TailKind.LATTICE_TAIL)


def chernoff_bound(model, beta: float, n: int) -> TailAsymptotic:
    """``P[S_n >= n beta] <= e^{-n I(beta)}``."""
    rf = _rf(model)
    m = rf.model
    rate = rf.rate(beta)
    a = rf.alpha_of_beta(beta) if m.beta0 < beta < m.beta_inf else math.nan
    return TailAsymptotic(-n * rate, n, beta, a, TailKind.CHERNOFF_BOUND)


def tail_asymptotic(model, beta: float, n: int) -> TailAsymptotic:
    """Sharp tail asymptotic appropriate to the model (lattice or not)."""
    rf = _rf(model)
    if rf.model.is_lattice:
        return lattice_tail(rf, beta, n)
    return bahadur_rao_tail(rf, beta, n)


def exact_log_tail(model: DistributionModel, beta: float, n: int) -> float:
    """``log P[S_n >= n beta]`` from the exact law of S_n, when the model has one."""
    return float(model.sum_logsf(n, n * beta))


def _is_block(tilted, n, alpha, beta, seed, block, size, lattice_h):
    rng = substream(seed, block)
    s = np.asarray(tilted.sample_sum(rng, n, size), dtype=float)
    excess = s - n * beta
    tol = OFF_LATTICE_TOL * lattice_h * max(1.0, n * abs(beta)) if lattice_h else 0.0
    # weights relative to e^{-n I(beta)}, hence in (0, 1]
    w = np.where(excess >= -tol, np.exp(-alpha * np.maximum(excess, 0.0)), 0.0)
    return math.fsum(w), math.fsum(w * w)


def estimate_tail_is(model, beta: float, n: int, reps: int, seed: int, threads: int = 1) -> ISEstimate:
    """Unbiased importance-sampling estimate of ``P[S_n >= n beta]``.

    ``S_n`` is drawn under the model tilted at ``alpha = alpha_of_beta(beta)``
    and each hit is weighted by ``e^{-alpha S_n + n phi(alpha)}``.  Replicates
    are generated in fixed blocks of 8192 draws, block ``j`` using stream
    ``(seed, j)``, so the result does not depend on ``threads``.
    """
    if reps < 100:
        raise DomainError("estimate_tail_is needs reps >= 100")
    rf = _rf(model)
    m = rf.model
    a = rf.alpha_of_beta(beta)
    tilted = m.tilt(a)
    log_scale = -n * rf.rate(beta)
    h = m.lattice.h if m.is_lattice else 0.0
    sizes = [min(IS_BLOCK, reps - start) for start in range(0, reps, IS_BLOCK)]
    args = [(tilted, n, a, beta, seed, j, size, h) for j, size in enumerate(sizes)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda p: _is_block(*p), args))
    else:
        parts = [_is_block(*p) for p in args]
    s1 = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    mean_r = s1 / reps
    var_r = max(s2 / reps - mean_r**2, 0.0) * reps / (reps - 1)
    scale = math.exp(log_scale)
    return ISEstimate(mean_r * scale, math.sqrt(var_r / reps) * scale, reps, seed)


_MODES = {"ExactTilt": "exact", "MonteCarlo": "mc"}


def truncated_moment(
    model, alpha: float, b_n: float, n: int, mode: str = "exact", reps: int = 10_000, seed: int = 0
) -> float:
    """``M_alpha(n) = e^{-phi(alpha) n} E[e^{alpha S_n} 1{S_n <= b_n}] = P[S~_n <= b_n]``.

    ``mode="exact"`` (alias ``"ExactTilt"``) evaluates the tilted law of S_n in closed form (catalog
    models only); ``mode="mc"`` (``"MonteCarlo"``) samples the tilted sum, or weights untilted
    draws when the tilted model has no sampler.
    """
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    mode = _MODES.get(mode, mode)
    m = _rf(model).model
    tilted = m.tilt(alpha)
    if mode == "exact":
        try:
            return float(tilted.sum_cdf(n, b_n))
        except UnsupportedError:
            raise UnsupportedError(f"ExactTilt unavailable for {m.name}") from None
    if mode != "mc":
        raise DomainError(f"unknown truncated_moment mode {mode!r}")
    rng = substream(seed, 0)
    try:
        s = np.asarray(tilted.sample_sum(rng, n, reps))
        return float(np.mean(s <= b_n))
    except UnsupportedError:
        s = np.asarray(m.sample_sum(rng, n, reps))
        lw = alpha * s - n * m.phi(alpha)
        return float(np.mean(np.where(s <= b_n, np.exp(lw), 0.0)))


def truncated_moment_expansion(model, alpha: float, b_n: float, n: int) -> float:
    """Two-term expansion of ``M_alpha(n)`` for non-lattice X.

    With ``r = b_n - phi'(alpha) n`` and ``v = 2 pi phi''(alpha) n`` this is
    ``1/2 + r / sqrt(v) + phi3 / (6 sqrt(2 pi n) phi''(alpha)^{3/2})`` where
    ``phi3`` is the third derivative at alpha.  At ``alpha = 1`` with the
    stable ``b_n`` it equals half of :func:`c1_braces`.
    """
    m = _rf(model).model
    if m.is_lattice:
        raise DomainError("the expansion is for non-lattice models")
    d2, d3 = float(m.d2phi(alpha)), float(m.d3phi(alpha))
    r = b_n - float(m.dphi(alpha)) * n
    return 0.5 + r / math.sqrt(2 * math.pi * d2 * n) + d3 / (6 * math.sqrt(2 * math.pi * n) * d2**1.5)


def edgeworth_cdf(mu2: float, mu3: float, n: int, x):
    """First-order Edgeworth approximation of ``P[S_n / sqrt(mu2 n) <= x]``."""
    if not mu2 > 0 or n < 1:
        raise DomainError("need mu2 > 0 and n >= 1")
    x = np.asarray(x, dtype=float)
    corr = mu3 * (1 - x**2) * np.exp(-(x**2) / 2) / (6 * math.sqrt(2 * math.pi * n) * mu2**1.5)
    out = norm.cdf(x) + corr
    return float(out) if out.ndim == 0 else out


def c1_braces(model: DistributionModel, n: int) -> float:
    """``1 - (log(2 pi phi''(1) n) - phi'''(1)/(3 phi''(1))) / sqrt(2 pi phi''(1) n)``."""
    v = 2 * math.pi * model.d2phi(1.0) * n
    return 1.0 - (math.log(v) - model.d3phi(1.0) / (3 * model.d2phi(1.0))) / math.sqrt(v)


def an_expansion_c1(model, n: int, N_n: int) -> float:
    """log of the expanded centering ``A_n`` at ``c = c1`` (non-lattice)."""
    m = _rf(model).model
    if n < 2:
        raise NTooSmallError("expansion needs n >= 2")
    br = c1_braces(m, n)
    if br <= 0:
        raise NTooSmallError(f"expansion braces {br:.3g} <= 0 at n={n}; n too small")
    return math.log(0.5 * N_n) + m.phi(1.0) * n + math.log(br)


def stable_bn(model, alpha: float, n: int) -> float:
    """Location ``b_n`` of the stable normalization.

    Non-lattice: ``beta n - log(alpha sqrt(2 pi phi''(alpha) n)) / alpha``;
    lattice with span h: ``beta n - log(sqrt(2 pi phi''(alpha) n) / h) / alpha``.
    """
    m = _rf(model).model
    beta = m.dphi(alpha)
    root = math.sqrt(2 * math.pi * m.d2phi(alpha) * n)
    pref = root / m.lattice.h if m.is_lattice else alpha * root
    return beta * n - math.log(pref) / alpha


def default_N(c: float, n: int) -> int:
    """``N_n = round(e^{cn})`` (at least 1)."""
    return max(1, int(round(math.exp(c * n))))


def diagnostic_tau_tail(
    model, c: float, n: int, tau: float, reps: int, seed: int, N_n: int | None = None, threads: int = 1
) -> tuple[ISEstimate, float]:
    """Estimate ``N_n P[S_n - b_n > log tau]``; returns the estimate and ``tau^{-alpha}``."""
    rf = _rf(model)
    if rf.model.is_lattice:
        raise DomainError("diagnostic_tau_tail is for non-lattice models")
    if not 0 < c < rf.c2:
        raise DomainError(f"c must lie in (0, c2={rf.c2})")
    if not tau > 0:
        raise DomainError("tau must be positive")
    a, _ = rf.alpha_of_c(c)
    N = default_N(c, n) if N_n is None else N_n
    beta = (stable_bn(rf, a, n) + math.log(tau)) / n
    est = estimate_tail_is(rf, beta, n, reps, seed, threads)
    scaled = ISEstimate(N * est.mean, N * est.stderr, est.reps, est.seed)
    return scaled, tau ** (-a)


def lattice_mass_diagnostic(model, c: float, n: int, ks, N_n: int | None = None) -> list[tuple[float, float, float]]:
    """Exact ``N_n P[W_n = x]`` at lattice points ``x = e^{h k - Delta_n}``.

    Here ``W_n = e^{S_n - b_n}`` with the lattice ``b_n``.  Returns rows
    ``(x, N_n P[W_n = x], x^{-alpha})``; needs a model with an exact law of S_n.
    """
    rf = _rf(model)
    m = rf.model
    if not m.is_lattice:
        raise DomainError("lattice_mass_diagnostic needs a lattice model")
    a, _ = rf.alpha_of_c(c)
    h = m.lattice.h
    N = default_N(c, n) if N_n is None else N_n
    b = stable_bn(rf, a, n)
    floor_b = h * math.floor(b / h)
    delta = b - floor_b
    rows = []
    for k in ks:
        s = floor_b + h * k  # S_n value giving W_n = e^{hk - Delta_n}
        x = math.exp(h * k - delta)
        # P[S_n = s] = P[S_n >= s] - P[S_n >= s + h]
        hi = m.sum_logsf(n, s)
        lo = m.sum_logsf(n, s + h)
        log_p = hi + math.log(-math.expm1(lo - hi))
        rows.append((x, N * math.exp(log_p), x ** (-a)))
    return rows
