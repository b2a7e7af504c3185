"""Distribution models for the increments X of the random products.

Every model exposes its cumulant generating function ``phi(t) = log E[e^{tX}]``
for ``t >= 0`` together with the first three derivatives, the mean ``beta0``,
the essential supremum ``beta_inf``, an optional lattice descriptor and
samplers for single increments and for partial sums ``S_n = X_1 + ... + X_n``.

Catalog models know the exact law of ``S_n``, so ``sample_sum`` costs one draw
regardless of ``n`` and the exact tilted distribution functions needed by the
truncated-moment code are available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Callable

import numpy as np
from scipy import special, stats

from .errors import DomainError, UnsupportedError

LATTICE_TOL = 1e-12
POISSON_SWITCH = 1e-8


@dataclass(frozen=True)
class Lattice:
    """Values of X lie in ``offset + h*Z`` and ``h`` is maximal."""

    h: float
    offset: float = 0.0


def _log_gamma_p_scalar(a: float, x: float) -> float:
    if x <= 0:
        return -math.inf
    p = special.gammainc(a, x)
    if p > 1e-280:
        return math.log(p)
    # deep left tail: P(a, x) = x^a e^{-x} / Gamma(a + 1) * sum_k x^k / ((a+1)...(a+k))
    term, total, k = 1.0, 1.0, 0
    while term > 1e-17 * total:
        k += 1
        term *= x / (a + k)
        total += term
    return a * math.log(x) - x - special.gammaln(a + 1) + math.log(total)


_log_gamma_p = np.vectorize(_log_gamma_p_scalar, otypes=[float])


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("phi is only defined for t >= 0")
    return t


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def maximal_span(support, tol: float = 1e-9) -> float:
    """Largest h with every support point an integer multiple of h.

    The support points are expressed relative to their minimum, divided by the
    smallest nonzero gap and the integer gcd of the resulting ratios is taken.
    """
    pts = np.sort(np.unique(np.asarray(support, dtype=float)))
    if pts.size < 2:
        raise DomainError("a non-degenerate lattice needs two support points")
    diffs = pts[1:] - pts[0]
    unit = np.min(np.diff(pts))
    ratios = diffs / unit
    ints = np.rint(ratios)
    # refine the unit until all gaps are integer multiples of it
    for denom in range(1, 1000):
        scaled = ratios * denom
        ints = np.rint(scaled)
        if np.all(np.abs(scaled - ints) <= tol * np.maximum(1.0, scaled)):
            g = reduce(math.gcd, (int(k) for k in ints))
            return float(unit * g / denom)
    raise DomainError("support does not lie on a lattice")


class DistributionModel:
    """Base class for a law of X satisfying ``E[e^{tX}] < inf`` for all t >= 0.

    Subclasses override :meth:`phi` and, when they can, the closed-form
    derivatives.  Without overrides the derivatives fall back to central
    finite differences.
    """

    name = "model"
    beta0: float = -math.inf
    beta_inf: float = math.inf
    lattice: Lattice | None = None
    #: True when ``sample_sum`` draws S_n exactly instead of summing n draws.
    exact_sum = False

    def phi(self, t):
        raise NotImplementedError

    def _fd_step(self, t, order):
        base = (1e-5, 1e-4, 1e-3)[order - 1]
        return np.maximum(base, base * np.abs(t))

    def dphi(self, t):
        t = _check_t(t)
        h = self._fd_step(t, 1)
        central = (self.phi(t + h) - self.phi(np.maximum(t - h, 0.0))) / (2 * h)
        # second-order one-sided stencil near the boundary t = 0
        fwd = (-3 * self.phi(t) + 4 * self.phi(t + h) - self.phi(t + 2 * h)) / (2 * h)
        return _out(np.where(t >= h, central, fwd))

    def d2phi(self, t):
        t = _check_t(t)
        h = self._fd_step(t, 2)
        central = (self.phi(t + h) - 2 * self.phi(t) + self.phi(np.maximum(t - h, 0.0))) / h**2
        fwd = (2 * self.phi(t) - 5 * self.phi(t + h) + 4 * self.phi(t + 2 * h) - self.phi(t + 3 * h)) / h**2
        return _out(np.where(t >= h, central, fwd))

    def d3phi(self, t):
        t = _check_t(t)
        h = self._fd_step(t, 3)
        c = np.where(t >= 2 * h, t, 2 * h)
        num = self.phi(c + 2 * h) - 2 * self.phi(c + h) + 2 * self.phi(c - h) - self.phi(c - 2 * h)
        return _out(num / (2 * h**3))

    @property
    def is_lattice(self) -> bool:
        return self.lattice is not None

    @property
    def c_inf(self) -> float:
        """``lim_{a -> inf} (a*phi'(a) - phi(a))``; +inf when it diverges."""
        prev = None
        for k in range(0, 64):
            a = 2.0**k
            g = a * self.dphi(a) - self.phi(a)
            if not math.isfinite(g):
                return math.inf
            if prev is not None and abs(g - prev) <= 1e-12 * max(1.0, abs(g)):
                return float(g)
            prev = g
        return math.inf

    def sample(self, rng: np.random.Generator, size=None):
        """Draw increments X."""
        raise NotImplementedError

    def sample_sum(self, rng: np.random.Generator, n: int, size=None):
        """Draw the partial sum ``S_n`` of ``n`` independent increments."""
        if n < 1:
            raise DomainError("n must be >= 1")
        shape = () if size is None else (size if isinstance(size, tuple) else (size,))
        out = np.zeros(shape)
        for _ in range(n):
            out = out + self.sample(rng, shape)
        return _out(out)

    def tilt(self, alpha: float) -> DistributionModel:
        """Exponentially tilted model ``dF~/dF = e^{alpha x - phi(alpha)}``."""
        if not alpha > 0:
            raise DomainError("tilt parameter must be positive")
        return TiltedModel(self, alpha)

    def sum_histogram(self, rng: np.random.Generator, n: int, count: int):
        """Histogram of ``count`` independent copies of ``S_n``.

        Returns ``(values, counts)``.  Only lattice models with finitely many
        values of ``S_n`` provide it.
        """
        raise UnsupportedError(f"no histogram sampler for {self.name}")

    def sum_cdf(self, n: int, x):
        """Exact ``P[S_n <= x]``."""
        raise UnsupportedError(f"no exact law of S_n for {self.name}")

    def sum_logsf(self, n: int, x):
        """Exact ``log P[S_n >= x]``."""
        raise UnsupportedError(f"no exact law of S_n for {self.name}")

    def __repr__(self):
        return self.name


class TiltedModel(DistributionModel):
    """Generic exponential tilt of an arbitrary model (no sampler)."""

    def __init__(self, base: DistributionModel, alpha: float):
        self.base = base
        self.alpha = float(alpha)
        self.name = f"tilt({base.name},{alpha:g})"
        self.beta0 = base.dphi(self.alpha)
        self.beta_inf = base.beta_inf
        self.lattice = base.lattice

    def phi(self, t):
        t = _check_t(t)
        return _out(self.base.phi(t + self.alpha) - self.base.phi(self.alpha))

    def dphi(self, t):
        return self.base.dphi(_check_t(t) + self.alpha)

    def d2phi(self, t):
        return self.base.d2phi(_check_t(t) + self.alpha)

    def d3phi(self, t):
        return self.base.d3phi(_check_t(t) + self.alpha)

    def tilt(self, alpha):
        if not alpha > 0:
            raise DomainError("tilt parameter must be positive")
        return self.base.tilt(self.alpha + alpha)

    def sample(self, rng, size=None):
        raise UnsupportedError("generic tilted models have no sampler")


class Gaussian(DistributionModel):
    """X ~ N(mu, sigma^2)."""

    exact_sum = True

    def __init__(self, mu: float = 0.0, sigma: float = 1.0):
        if not sigma > 0:
            raise DomainError("sigma must be positive")
        self.mu = float(mu)
        self.sigma = float(sigma)
        self.name = f"gaussian:mu={self.mu:g},sigma={self.sigma:g}"
        self.beta0 = self.mu
        self.beta_inf = math.inf

    def phi(self, t):
        t = _check_t(t)
        return _out(self.mu * t + 0.5 * self.sigma**2 * t**2)

    def dphi(self, t):
        t = _check_t(t)
        return _out(self.mu + self.sigma**2 * t)

    def d2phi(self, t):
        t = _check_t(t)
        return _out(np.full_like(t, self.sigma**2))

    def d3phi(self, t):
        t = _check_t(t)
        return _out(np.zeros_like(t))

    @property
    def c_inf(self):
        return math.inf

    def sample(self, rng, size=None):
        return rng.normal(self.mu, self.sigma, size)

    def sample_sum(self, rng, n, size=None):
        if n < 1:
            raise DomainError("n must be >= 1")
        return n * self.mu + math.sqrt(n) * self.sigma * rng.standard_normal(size)

    def tilt(self, alpha):
        if not alpha > 0:
            raise DomainError("tilt parameter must be positive")
        return Gaussian(self.mu + alpha * self.sigma**2, self.sigma)

    def sum_cdf(self, n, x):
        return _out(stats.norm.cdf(x, loc=n * self.mu, scale=self.sigma * math.sqrt(n)))

    def sum_logsf(self, n, x):
        return _out(stats.norm.logsf(x, loc=n * self.mu, scale=self.sigma * math.sqrt(n)))


class LogBeta(DistributionModel):
    """X = log V with V ~ Beta(a, 1), i.e. X = -E/a for E ~ Exp(1).

    ``a = 1`` is the uniform stick-breaking model (V uniform on (0, 1)).
    The family is closed under tilting: tilting by alpha gives ``a + alpha``.
    """

    exact_sum = True

    def __init__(self, a: float = 1.0):
        if not a > 0:
            raise DomainError("a must be positive")
        self.a = float(a)
        self.name = "loguniform" if self.a == 1.0 else f"logbeta:a={self.a:g}"
        self.beta0 = -1.0 / self.a
        self.beta_inf = 0.0

    def phi(self, t):
        t = _check_t(t)
        return _out(-np.log1p(t / self.a))

    def dphi(self, t):
        t = _check_t(t)
        return _out(-1.0 / (self.a + t))

    def d2phi(self, t):
        t = _check_t(t)
        return _out(1.0 / (self.a + t) ** 2)

    def d3phi(self, t):
        t = _check_t(t)
        return _out(-2.0 / (self.a + t) ** 3)

    @property
    def c_inf(self):
        return math.inf

    def sample(self, rng, size=None):
        return -rng.standard_exponential(size) / self.a

    def sample_sum(self, rng, n, size=None):
        if n < 1:
            raise DomainError("n must be >= 1")
        return -rng.standard_gamma(n, size) / self.a

    def tilt(self, alpha):
        if not alpha > 0:
            raise DomainError("tilt parameter must be positive")
        return LogBeta(self.a + alpha)

    def sum_cdf(self, n, x):
        x = np.asarray(x, dtype=float)
        # P[-G/a <= x] = P[G >= -a x], G ~ Gamma(n, 1)
        return _out(np.where(x < 0, special.gammaincc(n, np.maximum(-self.a * x, 0.0)), 1.0))

    def sum_logsf(self, n, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return _out(np.where(x < 0, _log_gamma_p(n, np.maximum(-self.a * x, 0.0)), -np.inf))


def LogUniform() -> LogBeta:
    """The stick-breaking model: e^X uniform on (0, 1)."""
    return LogBeta(1.0)


class LatticeBernoulli(DistributionModel):
    """X in {0, h} with ``P[X = h] = p``."""

    exact_sum = True

    def __init__(self, p: float = 0.5, h: float = 1.0):
        if not 0 < p < 1:
            raise DomainError("p must lie in (0, 1)")
        if not h > 0:
            raise DomainError("h must be positive")
        self.p = float(p)
        self.h = float(h)
        self.name = f"bernoulli:p={self.p:g},h={self.h:g}"
        self.beta0 = self.p * self.h
        self.beta_inf = self.h
        self.lattice = Lattice(maximal_span([0.0, self.h]), 0.0)

    def _q(self, t):
        # tilted success probability p e^{th} / (1 - p + p e^{th}), overflow-safe
        return special.expit(t * self.h + math.log(self.p) - math.log1p(-self.p))

    def phi(self, t):
        t = _check_t(t)
        # log(1 - p + p e^{th}) = th + log p + log1p((1-p)/p e^{-th})
        return _out(np.logaddexp(math.log1p(-self.p), t * self.h + math.log(self.p)))

    def dphi(self, t):
        t = _check_t(t)
        return _out(self.h * self._q(t))

    def d2phi(self, t):
        t = _check_t(t)
        q = self._q(t)
        return _out(self.h**2 * q * (1 - q))

    def d3phi(self, t):
        t = _check_t(t)
        q = self._q(t)
        return _out(self.h**3 * q * (1 - q) * (1 - 2 * q))

    @property
    def c_inf(self):
        return -math.log(self.p)

    def sample(self, rng, size=None):
        return self.h * (rng.random(size) < self.p)

    def sample_sum(self, rng, n, size=None):
        if n < 1:
            raise DomainError("n must be >= 1")
        return self.h * rng.binomial(n, self.p, size)

    def sum_histogram(self, rng, n, count):
        # multinomial over k = n, n-1, ..., 0 as a chain of conditional
        # binomials: P[K = k | K <= k] = pmf(k) / cdf(k)
        ks = np.arange(n + 1)
        ratio = np.exp(stats.binom.logpmf(ks, n, self.p) - stats.binom.logcdf(ks, n, self.p))
        ratio = np.clip(ratio, 0.0, 1.0)
        counts = np.zeros(n + 1, dtype=np.int64)
        left = int(count)
        for k in range(n, 0, -1):
            if left == 0:
                break
            r = ratio[k]
            # numpy's binomial inversion loses (1-r)^left once r < 1e-16; the
            # Poisson law is within total variation r of it
            got = int(rng.poisson(left * r)) if r < POISSON_SWITCH else int(rng.binomial(left, r))
            got = min(got, left)
            counts[k] = got
            left -= got
        counts[0] += left
        return self.h * ks, counts

    def tilt(self, alpha):
        if not alpha > 0:
            raise DomainError("tilt parameter must be positive")
        return LatticeBernoulli(float(self._q(alpha)), self.h)

    def _index(self, x, how):
        k = np.asarray(x, dtype=float) / self.h
        near = np.rint(k)
        snap = np.abs(k - near) < 1e-9
        return np.where(snap, near, how(k))

    def sum_cdf(self, n, x):
        k = self._index(x, np.floor)
        return _out(stats.binom.cdf(k, n, self.p))

    def sum_logsf(self, n, x):
        k = self._index(x, np.ceil)
        return _out(stats.binom.logsf(k - 1, n, self.p))


class CustomModel(DistributionModel):
    """A user model defined by its CGF and a sampler.

    Derivatives not supplied are computed by finite differences.
    """

    def __init__(
        self,
        name: str,
        phi: Callable,
        sampler: Callable,
        beta0: float,
        beta_inf: float,
        lattice: Lattice | None = None,
        dphi: Callable | None = None,
        d2phi: Callable | None = None,
        d3phi: Callable | None = None,
    ):
        self.name = name
        self._phi = phi
        self._sampler = sampler
        self.beta0 = beta0
        self.beta_inf = beta_inf
        self.lattice = lattice
        for attr, fn in (("dphi", dphi), ("d2phi", d2phi), ("d3phi", d3phi)):
            if fn is not None:
                setattr(self, attr, lambda t, fn=fn: _out(fn(_check_t(t))))

    def phi(self, t):
        return _out(self._phi(_check_t(t)))

    def sample(self, rng, size=None):
        return self._sampler(rng, size)


def parse_model(spec: str) -> DistributionModel:
    """Build a catalog model from a CLI string.

    Accepted forms: ``gaussian:mu=0,sigma=1``, ``loguniform``,
    ``logbeta:a=2``, ``bernoulli:p=0.5,h=1``.
    """
    kind, _, rest = spec.strip().partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise DomainError(f"bad model parameter {item!r}")
        params[key.strip()] = float(val)
    kind = kind.lower()
    try:
        if kind in ("gaussian", "normal"):
            return Gaussian(**params)
        if kind == "loguniform":
            if params:
                raise TypeError("loguniform takes no parameters")
            return LogUniform()
        if kind == "logbeta":
            return LogBeta(**params)
        if kind in ("bernoulli", "latticebernoulli"):
            return LatticeBernoulli(**params)
    except TypeError as exc:
        raise DomainError(f"bad parameters for {kind}: {exc}") from None
    raise DomainError(f"unknown model {spec!r}")
