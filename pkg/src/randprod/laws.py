"""Limit laws: characteristic functions and distribution functions.

The totally skewed alpha-stable law has log characteristic function

    -Gamma(1-alpha) |u|^alpha exp(-i pi alpha sgn(u) / 2)            alpha != 1
    i u (1 - euler_gamma) - |u| (pi/2 + i sgn(u) log|u|)            alpha == 1

i.e. Levy measure with tail ``nu(x, inf) = x^{-alpha}`` on the positive axis,
no centering for alpha < 1 and mean zero for alpha > 1.  The lattice limits
replace that Levy measure by unit-weighted atoms ``x^{-alpha}`` at the points
``exp(h k - Delta)``.

Distribution functions are obtained by Gil-Pelaez inversion,
``F(x) = 1/2 - (1/pi) int_0^inf Im[e^{-iux} phi(u)] / u du``.  Stable laws
use adaptive QUADPACK with a Fourier-weighted tail; lattice laws, whose
integrand oscillates at the frequency of the largest kept atom, use a fixed
composite Gauss-Legendre rule on half-period panels shared by all points.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn
from scipy.stats import norm

from .errors import DomainError, QuadratureError, UnsupportedError

CF_FLOOR = 40.0  # integrate until |cf| < e^{-40}
STABLE_TOL = 1e-6
LATTICE_TOL = 1e-4
SERIES_TOL = 1e-14


def _check_alpha(alpha):
    if not 0 < alpha < 2:
        raise DomainError(f"alpha={alpha} outside (0, 2)")


def stable_scale(alpha: float) -> float:
    """``-Re log phi(1)``: ``Gamma(1-alpha) cos(pi alpha/2)``, or ``pi/2`` at alpha = 1."""
    _check_alpha(alpha)
    if alpha == 1:
        return math.pi / 2
    return float(gamma_fn(1 - alpha) * math.cos(math.pi * alpha / 2))


def stable_log_cf(alpha: float, u):
    """Log characteristic function of the totally skewed alpha-stable law."""
    _check_alpha(alpha)
    u = np.asarray(u, dtype=float)
    au = np.abs(u)
    sg = np.sign(u)
    if alpha == 1:
        with np.errstate(divide="ignore", invalid="ignore"):
            lg = np.where(au > 0, np.log(np.where(au > 0, au, 1.0)), 0.0)
        out = 1j * u * (1 - np.euler_gamma) - au * (math.pi / 2 + 1j * sg * lg)
    else:
        out = -gamma_fn(1 - alpha) * au**alpha * np.exp(-0.5j * math.pi * alpha * sg)
    out = np.where(au > 0, out, 0.0 + 0.0j)
    return complex(out) if out.ndim == 0 else out


def _quad(f, a, b, tol, weight=None, wvar=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if weight is None:
            val, err = integrate.quad(f, a, b, epsabs=tol, epsrel=0.0, limit=400)
        else:
            val, err = integrate.quad(f, a, b, weight=weight, wvar=wvar, epsabs=tol, epsrel=0.0, limit=400)
    return val, err


def gil_pelaez_cdf(log_cf: Callable, x: float, upper: float, tol: float, max_err: float | None = None) -> float:
    """Invert a characteristic function at one point.

    ``upper`` is a cutoff beyond which ``|phi(u)| < e^{-40}``.  QUADPACK is
    asked for ``tol``; a total error estimate above ``max_err`` (default
    ``10 tol``) raises :class:`QuadratureError`.  The range
    ``(0, upper]`` is cut into dyadic panels; once the panels are longer than
    a few periods of ``e^{-iux}`` the oscillatory factor is handled by
    QUADPACK's sine/cosine-weighted rule instead.
    """

    def parts(u):
        psi = log_cf(u)
        mag = math.exp(psi.real)
        return mag * math.sin(psi.imag) / u, mag * math.cos(psi.imag) / u

    def integrand(u):
        if u == 0.0:
            return 0.0
        psi = log_cf(u)
        return math.exp(psi.real) * math.sin(psi.imag - u * x) / u

    ax = abs(x)
    split = upper if ax * upper <= 8 * math.pi else min(upper, 4 * math.pi / ax)
    # dyadic panels on (0, split]
    edges = [split * 2.0**-j for j in range(40, -1, -1)]
    total, err = _quad(integrand, 0.0, edges[0], tol / 50)
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e = _quad(integrand, lo, hi, tol / 50)
        total += v
        err += e
    if split < upper:
        # Im[e^{-iux} phi] / u = (mag sin b / u) cos(ux) - (mag cos b / u) sin(ux)
        v1, e1 = _quad(lambda u: parts(u)[0], split, upper, tol / 10, "cos", x)
        v2, e2 = _quad(lambda u: parts(u)[1], split, upper, tol / 10, "sin", x)
        total += v1 - v2
        err += e1 + e2
    gate = 10 * tol if max_err is None else max_err
    if not err <= gate:
        raise QuadratureError(f"Gil-Pelaez inversion at x={x}: error estimate {err:.3g} > {tol:.3g}")
    return min(1.0, max(0.0, 0.5 - total / math.pi))


def stable_cutoff(alpha: float) -> float:
    return (CF_FLOOR / stable_scale(alpha)) ** (1.0 / alpha)


def stable_cdf(alpha: float, x, tol: float = STABLE_TOL):
    """Distribution function of the totally skewed alpha-stable law."""
    _check_alpha(alpha)
    upper = stable_cutoff(alpha)

    def lcf(u):
        return stable_log_cf(alpha, u)

    xs = np.asarray(x, dtype=float)
    if alpha < 1:
        # support is [0, inf)
        vals = [0.0 if xi <= 0 else gil_pelaez_cdf(lcf, xi, upper, tol) for xi in xs.ravel()]
    else:
        vals = [gil_pelaez_cdf(lcf, xi, upper, tol) for xi in xs.ravel()]
    out = np.asarray(vals).reshape(xs.shape)
    return float(out) if out.ndim == 0 else out


# lattice infinitely divisible laws ------------------------------------------


def _first_index_at_least_one(Delta, h):
    # smallest k with h k - Delta >= 0
    return math.ceil(Delta / h - 1e-15)


def lattice_shift_constant(alpha: float, Delta: float, h: float) -> float:
    """Drift C of the lattice limit in its Levy-Khintchine form.

    ``sum_{x<1} x^{1-alpha}`` for alpha < 1 (no centering) and
    ``-sum_{x>=1} x^{1-alpha}`` for alpha > 1 (mean-zero centering), with x
    ranging over ``exp(h Z - Delta)``.
    """
    _check_lattice(alpha, Delta, h)
    k1 = _first_index_at_least_one(Delta, h)
    r = (1 - alpha) * h
    if alpha < 1:
        # k <= k1 - 1
        return math.exp((1 - alpha) * (h * (k1 - 1) - Delta)) / -math.expm1(-r)
    return -math.exp((1 - alpha) * (h * k1 - Delta)) / -math.expm1(r)


def _check_lattice(alpha, Delta, h):
    _check_alpha(alpha)
    if alpha == 1:
        raise UnsupportedError("lattice limit at alpha = 1 is not supported")
    if not h > 0:
        raise DomainError("h must be positive")
    if not 0 <= Delta <= h:
        raise DomainError(f"Delta={Delta} outside [0, h]")


def _e_iux_minus_1_minus_iux(z):
    """``e^{iz} - 1 - iz`` without cancellation for small z."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-3
    z2 = z * z
    series_re = -z2 / 2 + z2 * z2 / 24
    series_im = -z2 * z / 6 + z2 * z2 * z / 120
    re = np.where(small, series_re, -2.0 * np.sin(z / 2) ** 2)
    im = np.where(small, series_im, np.sin(z) - z)
    return re + 1j * im


@dataclass(frozen=True)
class LatticeSeries:
    """Index ranges and constants for the Levy-Khintchine sum.

    ``k_cap`` truncates the uncompensated atoms (x >= 1) at index ``k_cap``;
    the dropped atoms form a compound Poisson part of total rate ``lam``.
    """

    alpha: float
    Delta: float
    h: float
    k_cap: int | None = None
    k_one: int = field(init=False)
    k_hi: int = field(init=False)
    C: float = field(init=False)
    big_mass: float = field(init=False)
    lam: float = field(init=False)

    def __post_init__(self):
        a, d, h = self.alpha, self.Delta, self.h
        k1 = _first_index_at_least_one(d, h)
        object.__setattr__(self, "k_one", k1)
        # total mass of atoms with index >= k
        def tail(k):
            return math.exp(-a * (h * k - d)) / -math.expm1(-a * h)

        if self.k_cap is None:
            # atoms with x^{-alpha} < SERIES_TOL are dropped, remainder bounded by a geometric tail
            k_hi = k1 + max(1, math.ceil(-math.log(SERIES_TOL) / (a * h)) + 1)
            lam = 0.0
            big = tail(k1)
        else:
            k_hi = max(self.k_cap, k1 - 1)
            lam = tail(k_hi + 1)
            big = tail(k1) - lam
        object.__setattr__(self, "k_hi", k_hi)
        object.__setattr__(self, "C", lattice_shift_constant(a, d, h))
        object.__setattr__(self, "big_mass", big)
        object.__setattr__(self, "lam", lam)

    def k_lo(self, umax: float) -> int:
        # terms below are |u|^2 x^{2-alpha}/2 < SERIES_TOL
        if umax == 0:
            return self.k_one - 1
        lim = math.log(2 * SERIES_TOL / umax**2) / (2 - self.alpha)
        return min(self.k_one - 1, math.floor((lim + self.Delta) / self.h) - 1)


def lattice_id_log_cf(alpha: float, Delta: float, h: float, u):
    """Log characteristic function of the lattice infinitely divisible limit.

    ``i C u + sum_{x in exp(hZ - Delta)} (e^{iux} - 1 - iux 1{x<1}) x^{-alpha}``
    with C from :func:`lattice_shift_constant`.
    """
    _check_lattice(alpha, Delta, h)
    ser = LatticeSeries(alpha, Delta, h)
    return _lattice_log_cf(ser, u)


def _lattice_log_cf(ser: LatticeSeries, u):
    u = np.asarray(u, dtype=float)
    flat = u.ravel()
    umax = float(np.max(np.abs(flat))) if flat.size else 0.0
    a = ser.alpha
    ks_small = np.arange(ser.k_lo(umax), ser.k_one)
    xs_small = np.exp(ser.h * ks_small - ser.Delta)
    ks_big = np.arange(ser.k_one, ser.k_hi + 1)
    xs_big = np.exp(ser.h * ks_big - ser.Delta)
    ux_small = np.outer(flat, xs_small)
    small = _e_iux_minus_1_minus_iux(ux_small) @ xs_small ** (-a)
    ux_big = np.outer(flat, xs_big)
    big = np.exp(1j * ux_big) @ xs_big ** (-a) - ser.big_mass
    out = 1j * ser.C * flat + small + big
    out = np.where(flat == 0, 0.0 + 0.0j, out).reshape(u.shape)
    return complex(out) if out.ndim == 0 else out


def lattice_cutoff(ser: LatticeSeries) -> float:
    """u beyond which ``Re log phi(u) < -40`` on a geometric probe grid."""
    a, h = ser.alpha, ser.h
    k_est = abs(gamma_fn(1 - a) * math.cos(math.pi * a / 2)) / (a * h)
    upper = (CF_FLOOR / k_est) ** (1.0 / a)
    for _ in range(60):
        probe = upper * np.geomspace(1.0, 8.0, 64)
        if np.max(_lattice_log_cf(ser, probe).real) < -CF_FLOOR:
            return float(upper)
        upper *= 2.0
    raise QuadratureError("could not locate a cutoff for the lattice characteristic function")


LEFT_MARGIN = 60.0  # F(-60) of the capped law is negligible for alpha > 1
MAX_NODES = 4_000_000  # per cap group, beyond which single points go to QUADPACK
_GL = {m: np.polynomial.legendre.leggauss(m) for m in (6, 10)}


def _effective_cutoff(ser: LatticeSeries, upper: float, floor: float) -> float:
    """Smallest probe u beyond which ``|phi| < floor`` on a fine geometric grid."""
    probes = np.geomspace(min(1e-3, upper / 2), upper, 4000)
    re = _lattice_log_cf(ser, probes).real
    above = np.nonzero(re >= math.log(floor))[0]
    if above.size == 0:
        return float(probes[0])
    i = above[-1]
    return float(probes[min(i + 1, probes.size - 1)])


def _panel_nodes(edges: np.ndarray, m: int):
    g, w = _GL[m]
    lo, hi = edges[:-1, None], edges[1:, None]
    half = (hi - lo) / 2
    return (lo + half * (g + 1)).ravel(), (half * w).ravel()


def _inversion_sums(ser: LatticeSeries, s: np.ndarray, nodes, weights) -> np.ndarray:
    """``sum_j w_j Im[e^{-i u_j s} phi(u_j) / u_j]`` for every s."""
    out = np.zeros(s.size)
    chunk = max(256, 2**20 // max(100, s.size))  # bounds the atom x node and s x node blocks
    for a in range(0, nodes.size, chunk):
        u = nodes[a : a + chunk]
        G = np.exp(_lattice_log_cf(ser, u)) / u * weights[a : a + chunk]
        us = np.outer(s, u)
        out += np.cos(us) @ G.imag - np.sin(us) @ G.real
    return out


def _lattice_group(ser: LatticeSeries, s: np.ndarray, tol: float):
    """Gil-Pelaez inversion of the capped law at the points ``s``.

    Composite Gauss-Legendre on half-period panels of the fastest phase, with
    a geometrically graded start at u = 0; the 10-node and 6-node rules on
    the same panels give the error estimate.  Returns ``(F, err)`` or None
    when the node count would exceed MAX_NODES.
    """
    a = ser.alpha
    upper = lattice_cutoff(ser)
    floor = tol * 1e-3
    u_eff = _effective_cutoff(ser, upper, floor)
    smax = float(np.max(np.abs(s)))
    freq = smax + math.exp(ser.h * ser.k_hi - ser.Delta) + 1.0
    u0 = min(u_eff, math.pi / freq)
    # the integrand is O(u^{alpha-1}) (alpha < 1) or O(1) near 0
    eps = floor / (10.0 + smax)
    if a < 1:
        eps = min(eps, (a * floor) ** (1.0 / a))
    n_geo = max(1, math.ceil(math.log2(u0 / eps)))
    n_pan = max(0, math.ceil((u_eff - u0) * freq / math.pi))
    if (n_geo + n_pan) * 10 > MAX_NODES:
        return None
    edges = u0 * 2.0 ** -np.arange(n_geo, -1, -1, dtype=float)
    if n_pan:
        edges = np.concatenate([edges, np.linspace(u0, u_eff, n_pan + 1)[1:]])
    hi = _inversion_sums(ser, s, *_panel_nodes(edges, 10))
    lo = _inversion_sums(ser, s, *_panel_nodes(edges, 6))
    # neglected pieces: [0, eps] and [u_eff, upper], both bounded by floor-sized terms
    err = (np.abs(hi - lo) + floor * (1 + math.log(upper / u_eff))) / math.pi
    F = math.exp(-ser.lam) * (0.5 - hi / math.pi)
    return np.clip(F, 0.0, 1.0), err


def lattice_id_cdf(alpha: float, Delta: float, h: float, x, tol: float = LATTICE_TOL):
    """Distribution function of the lattice infinitely divisible limit.

    Atoms far above the evaluation point ``t`` enter only through the
    probability that none of them fires: writing ``W = V + J`` with J the
    compound Poisson sum of atoms beyond a cap, ``F_W(t) = e^{-lam} F_V(t)``
    when every dropped atom exceeds ``t`` by more than the left extent of V.
    Points sharing a cap are inverted together.  Raises QuadratureError when
    the error estimate exceeds ``10 tol``.
    """
    _check_lattice(alpha, Delta, h)
    margin = 0.0 if alpha < 1 else LEFT_MARGIN
    xs = np.asarray(x, dtype=float)
    flat = xs.ravel()
    out = np.zeros(flat.size)
    groups: dict[int, list[int]] = {}
    for i, xi in enumerate(flat):
        if alpha < 1 and xi <= 0:
            continue  # nonnegative support
        # last index whose atom is <= max(xi, 1) + margin
        k_cap = math.floor((math.log(max(xi, 1.0) + margin) + Delta) / h)
        groups.setdefault(k_cap, []).append(i)
    for k_cap, idx in groups.items():
        ser = LatticeSeries(alpha, Delta, h, k_cap=k_cap)
        pts = flat[idx]
        res = _lattice_group(ser, pts, tol)
        if res is None:
            upper = lattice_cutoff(ser)

            def lcf(u, ser=ser):
                return complex(_lattice_log_cf(ser, u))

            vals = [gil_pelaez_cdf(lcf, xi, upper, tol * 1e-3, max_err=10 * tol) for xi in pts]
            out[idx] = math.exp(-ser.lam) * np.asarray(vals)
            continue
        F, err = res
        if np.any(err > 10 * tol):
            j = int(np.argmax(err))
            raise QuadratureError(f"lattice inversion at x={pts[j]}: error estimate {err[j]:.3g} > {10 * tol:.3g}")
        out[idx] = F
    out = out.reshape(xs.shape)
    return float(out) if out.ndim == 0 else out


# limit law objects -----------------------------------------------------------


class LawKind(str, Enum):
    NORMAL01 = "Normal01"
    NORMAL_HALF = "NormalHalf"
    STABLE = "StableSkewed"
    LATTICE_ID = "LatticeID"


@dataclass(frozen=True)
class LimitLaw:
    kind: LawKind
    alpha: float | None = None
    Delta: float | None = None
    h: float | None = None

    @property
    def C(self) -> float | None:
        if self.kind is LawKind.LATTICE_ID:
            return lattice_shift_constant(self.alpha, self.Delta, self.h)
        return None

    def cdf(self, x):
        if self.kind is LawKind.NORMAL01:
            return norm.cdf(x)
        if self.kind is LawKind.NORMAL_HALF:
            return norm.cdf(x, scale=math.sqrt(0.5))
        if self.kind is LawKind.STABLE:
            return stable_cdf(self.alpha, x)
        return lattice_id_cdf(self.alpha, self.Delta, self.h, x)

    def log_cf(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind is LawKind.NORMAL01:
            return -(u**2) / 2 + 0j
        if self.kind is LawKind.NORMAL_HALF:
            return -(u**2) / 4 + 0j
        if self.kind is LawKind.STABLE:
            return stable_log_cf(self.alpha, u)
        return lattice_id_log_cf(self.alpha, self.Delta, self.h, u)

    def describe(self) -> str:
        if self.kind in (LawKind.NORMAL01, LawKind.NORMAL_HALF):
            return self.kind.value
        if self.kind is LawKind.STABLE:
            return f"{self.kind.value}(alpha={self.alpha:.6g})"
        return f"{self.kind.value}(alpha={self.alpha:.6g},Delta={self.Delta:.6g},h={self.h:g})"
