import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats

from randprod import (
    DomainError,
    LawKind,
    LimitLaw,
    QuadratureError,
    UnsupportedError,
    lattice_id_cdf,
    lattice_id_log_cf,
    lattice_shift_constant,
    stable_cdf,
    stable_log_cf,
)
from randprod.laws import LatticeSeries, _lattice_log_cf, gil_pelaez_cdf, lattice_cutoff, stable_cutoff, stable_scale

ALPHA_GRID = [0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.7, 1.9]
U_GRID = [-3.0, -1.0, -0.3, 0.3, 1.0, 3.0]


def test_stable_log_cf_examples():
    assert stable_log_cf(0.5, 1.0) == pytest.approx(-1.2533141373155 + 1.2533141373155j, abs=1e-12)
    assert stable_log_cf(1.0, 1.0) == pytest.approx(-math.pi / 2 + (1 - np.euler_gamma) * 1j, abs=1e-12)
    for a in ALPHA_GRID + [1.0]:
        assert stable_log_cf(a, 0.0) == 0
    with pytest.raises(DomainError):
        stable_log_cf(2.0, 1.0)
    with pytest.raises(DomainError):
        stable_log_cf(0.0, 1.0)


def test_strict_stability():
    for a in ALPHA_GRID:
        for u in U_GRID:
            lhs = 2 * stable_log_cf(a, u)
            rhs = stable_log_cf(a, 2 ** (1 / a) * u)
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_cf_modulus_bounded():
    us = np.linspace(-50, 50, 1001)
    for a in ALPHA_GRID + [1.0]:
        assert stable_scale(a) > 0
        assert np.all(np.exp(np.real(stable_log_cf(a, us))) <= 1.0)


def test_cf_conjugate_symmetry():
    for a in [0.5, 1.0, 1.5]:
        assert stable_log_cf(a, -1.7) == pytest.approx(np.conj(stable_log_cf(a, 1.7)), abs=1e-14)


def test_stable_cdf_levy_oracle():
    # alpha = 1/2: cf exponent -sqrt(pi) sqrt(|u|)(1 - i sgn u) is the Levy law with scale pi/2
    xs = np.array([0.5, 1.0, 2.0, 5.0])
    want = special.erfc(np.sqrt(math.pi / (4 * xs)))
    np.testing.assert_allclose(stable_cdf(0.5, xs), want, atol=1e-5)
    assert stable_cdf(0.5, -1.0) == 0.0


@pytest.mark.parametrize("alpha", [0.7, 1.0, 1.43])
def test_stable_cdf_vs_scipy(alpha):
    xs = np.array([-1.5, -0.5, 0.3, 1.0, 4.0])
    if alpha < 1:
        xs = xs[xs > 0]
    loc = (1 - np.euler_gamma) if alpha == 1 else 0.0
    dist = stats.levy_stable(alpha, 1.0, loc=loc, scale=stable_scale(alpha) ** (1 / alpha))
    old = stats.levy_stable.parameterization
    stats.levy_stable.parameterization = "S1"
    try:
        want = dist.cdf(xs)
    finally:
        stats.levy_stable.parameterization = old
    np.testing.assert_allclose(stable_cdf(alpha, xs), want, atol=2e-6)


def test_stable_cdf_limits():
    for a in [1.2, 1.5, 1.8]:
        # Levy density alpha x^{-alpha-1} on the right gives 1 - F(x) ~ x^{-alpha}
        assert (1 - stable_cdf(a, 1e3)) * 1e3**a == pytest.approx(1.0, rel=0.01)
        # the left tail is lighter than any power but not thin at -8 for alpha near 1
        assert stable_cdf(a, -40.0) < 1e-6
        assert stable_cdf(a, -8.0) < stable_cdf(a, -4.0) < stable_cdf(a, 0.0)
    assert stable_cdf(1.5, 1e4) == pytest.approx(1 - 1e4**-1.5, abs=1e-6)


def test_stable_cdf_monotone():
    xs = np.linspace(-4, 10, 60)
    for a in [0.6, 1.0, 1.5]:
        F = stable_cdf(a, xs)
        assert np.all(np.diff(F) >= -1e-6)
        assert np.all((F >= 0) & (F <= 1))


def test_stable_mean_zero():
    a = 1.5
    X = 200.0
    right, _ = integrate.quad(lambda x: 1 - stable_cdf(a, x), 0, X, limit=200, epsabs=1e-6)
    left, _ = integrate.quad(lambda x: stable_cdf(a, x), -20, 0, limit=100, epsabs=1e-7)
    # 1 - F(x) ~ x^{-alpha} beyond X
    tail = X ** (1 - a) / (a - 1)
    assert abs(right + tail - left) < 1e-3


def test_gil_pelaez_normal():
    for x in [-2.0, -0.3, 0.0, 0.4, 1.7]:
        got = gil_pelaez_cdf(lambda u: -(u**2) / 2, x, 12.0, 1e-9)
        assert got == pytest.approx(stats.norm.cdf(x), abs=1e-8)


def test_quadrature_error_reported():
    # a cf with a jump cannot be inverted to the requested accuracy
    with pytest.raises(QuadratureError):
        gil_pelaez_cdf(lambda u: 0.0 if u < 1e-7 else -1e-9 * u, 0.5, 1e9, 1e-14)


def test_stable_cutoff():
    for a in [0.5, 1.0, 1.5]:
        U = stable_cutoff(a)
        assert stable_scale(a) * U**a == pytest.approx(40.0, rel=1e-12)


def test_shift_constants():
    assert lattice_shift_constant(0.5, 0.0, 1.0) == pytest.approx(math.exp(-0.5) / (1 - math.exp(-0.5)), rel=1e-12)
    assert lattice_shift_constant(0.5, 0.0, 1.0) == pytest.approx(1.541494, abs=1e-6)
    assert lattice_shift_constant(1.5, 0.0, 1.0) == pytest.approx(-2.541494, abs=1e-6)
    with pytest.raises(UnsupportedError):
        lattice_shift_constant(1.0, 0.3, 1.0)


@pytest.mark.parametrize("alpha", [0.4, 0.8, 1.3, 1.7])
def test_shift_constant_brute_force(alpha):
    h, d = 0.7, 0.25
    ks = np.arange(-4000, 1000)
    xs = np.exp(h * ks - d)
    if alpha < 1:
        want = math.fsum(xs[xs < 1] ** (1 - alpha))
    else:
        want = -math.fsum(xs[(xs >= 1) & (xs < 1e300)] ** (1 - alpha))
    assert lattice_shift_constant(alpha, d, h) == pytest.approx(want, rel=1e-10)


def test_shift_constant_delta_wraps():
    for a in [0.5, 1.5]:
        assert lattice_shift_constant(a, 1.0, 1.0) == pytest.approx(lattice_shift_constant(a, 0.0, 1.0), rel=1e-12)


def test_lattice_log_cf_basic():
    assert lattice_id_log_cf(0.5, 0.0, 1.0, 0.0) == 0
    us = np.array([-5, -1, -0.1, 0.1, 1, 5, 40])
    for a in [0.5, 1.5]:
        lc = lattice_id_log_cf(a, 0.0, 1.0, us)
        assert np.all(np.abs(np.exp(lc)) < 1)
    with pytest.raises(UnsupportedError):
        lattice_id_log_cf(1.0, 0.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        lattice_id_log_cf(0.5, 1.5, 1.0, 1.0)


@pytest.mark.parametrize("alpha,Delta", [(0.5, 0.0), (0.65, 0.53), (1.5, 0.2)])
def test_lattice_log_cf_brute_force(alpha, Delta):
    h = 1.0
    ks = np.arange(-80, 200)
    xs = np.exp(h * ks - Delta)
    C = lattice_shift_constant(alpha, Delta, h)
    for u in [0.3, 1.0, 2.5]:
        # e^{iy} - 1 written as -2 sin^2(y/2) + i sin y keeps small-y terms accurate
        re = -2 * np.sin(u * xs / 2) ** 2
        im = np.sin(u * xs) - u * xs * (xs < 1)
        terms = (re + 1j * im) * xs ** (-alpha)
        want = 1j * C * u + complex(math.fsum(terms.real), math.fsum(terms.imag))
        assert lattice_id_log_cf(alpha, Delta, h, u) == pytest.approx(want, abs=1e-10)


def test_tail_mass_geometric():
    a, d, h = 0.5, 0.3, 1.0
    for cap in [0, 3, 10]:
        ser = LatticeSeries(a, d, h, k_cap=cap)
        ks = np.arange(cap + 1, cap + 200)
        direct = math.fsum(np.exp(-a * (h * ks - d)))
        closed = math.exp(-a * (h * (cap + 1) - d)) / (1 - math.exp(-a * h))
        assert ser.lam == pytest.approx(closed, rel=1e-12)
        assert direct == pytest.approx(closed, rel=1e-12)


def test_lattice_cdf_monotone_and_limits():
    a, d = 0.5, 0.3
    xs = np.concatenate([np.linspace(0.05, 20, 100), np.geomspace(20.5, 2e3, 100)])
    F = lattice_id_cdf(a, d, 1.0, xs)
    assert np.all(np.diff(F) >= -1e-4)
    assert lattice_id_cdf(a, d, 1.0, -40.0) < 1e-3
    # the right tail is x^{-alpha}-heavy: mass beyond 1e4 is about 0.02
    tail = 1 - lattice_id_cdf(a, d, 1.0, 1e4)
    ks = np.arange(math.floor(math.log(1e4) + d) + 1, 400)
    geo = math.fsum(np.exp(-a * (ks - d)))
    assert tail == pytest.approx(geo, rel=0.05)
    assert lattice_id_cdf(a, d, 1.0, 1e8) > 1 - 1e-3


def test_lattice_cdf_alpha_above_one():
    a, d = 1.5, 0.2
    F = lattice_id_cdf(a, d, 1.0, [-40.0, -3.0, 0.0, 3.0, 50.0])
    assert F[0] < 1e-3 and F[-1] > 1 - 1e-2
    assert np.all(np.diff(F) >= -1e-4)


def test_lattice_cdf_delta_continuity():
    xs = np.linspace(0.1, 30, 25)
    F1 = lattice_id_cdf(0.65, 0.5, 1.0, xs)
    F2 = lattice_id_cdf(0.65, 0.5 + 1e-6, 1.0, xs)
    assert np.max(np.abs(F1 - F2)) < 1e-3


def test_lattice_cap_matches_plain_inversion():
    # uncapped cf inverted by adaptive QUADPACK at a tight tolerance
    a, d, x = 0.5, 0.3, 2.0
    ser = LatticeSeries(a, d, 1.0)
    upper = lattice_cutoff(ser)
    plain = gil_pelaez_cdf(lambda u: lattice_id_log_cf(a, d, 1.0, u), x, upper, 1e-6, max_err=1e-3)
    assert lattice_id_cdf(a, d, 1.0, x) == pytest.approx(plain, abs=1e-4)


def test_lattice_cdf_brute_quadrature():
    # dense Gauss-Legendre on the capped cf, independent panel layout
    a, d = 0.5, 0.3
    x = 1046.44936564
    k_cap = math.floor(math.log(x) + d)
    ser = LatticeSeries(a, d, 1.0, k_cap=k_cap)
    upper = lattice_cutoff(ser)
    g, w = np.polynomial.legendre.leggauss(40)
    edges = np.concatenate([[0.0], np.geomspace(1e-14, 1e-3, 120), np.linspace(1e-3, upper, 60000)[1:]])
    lo, hi = edges[:-1, None], edges[1:, None]
    u = (lo + (hi - lo) / 2 * (g + 1)).ravel()
    wt = ((hi - lo) / 2 * w).ravel()
    total = 0.0
    for k in range(0, u.size, 20000):
        uu = u[k : k + 20000]
        val = (np.exp(_lattice_log_cf(ser, uu) - 1j * uu * x) / uu).imag
        total += math.fsum(val * wt[k : k + 20000])
    want = math.exp(-ser.lam) * (0.5 - total / math.pi)
    assert lattice_id_cdf(a, d, 1.0, x) == pytest.approx(want, abs=1e-5)


def test_limit_law_objects():
    n01 = LimitLaw(LawKind.NORMAL01)
    assert n01.cdf(0.0) == 0.5 and n01.C is None
    half = LimitLaw(LawKind.NORMAL_HALF)
    assert half.cdf(1.0) == pytest.approx(stats.norm.cdf(math.sqrt(2)))
    assert half.log_cf(2.0) == pytest.approx(-1.0)
    lat = LimitLaw(LawKind.LATTICE_ID, alpha=0.5, Delta=0.0, h=1.0)
    assert lat.C == pytest.approx(1.541494, abs=1e-6)
    assert "alpha=0.5" in lat.describe()
    st_ = LimitLaw(LawKind.STABLE, alpha=1.5)
    assert st_.log_cf(0.0) == 0
    assert st_.cdf(50.0) > 0.99


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 1.95).filter(lambda a: abs(a - 1) > 1e-3), st.floats(-20, 20))
def test_stable_cf_bounded_property(a, u):
    assert abs(np.exp(stable_log_cf(a, u))) <= 1.0
    lhs = 2 * stable_log_cf(a, u)
    assert abs(lhs - stable_log_cf(a, 2 ** (1 / a) * u)) <= 1e-12 * max(1.0, abs(lhs))
