"""Acceptance criteria 1-14.

Each test prints one ``PASS``/``FAIL criterion k: ...`` line and then
asserts the same condition.  Run directly (``python tests/test_acceptance.py``)
to get just the fourteen lines.
"""

import math
import os
import time

import numpy as np
import pytest
from scipy import stats

from randprod import (
    Gaussian,
    LatticeBernoulli,
    LogUniform,
    RateFunction,
    SimConfig,
    bahadur_rao_tail,
    estimate_tail_is,
    lattice_point_mass,
    lattice_tail,
    simulate_statistic,
    stable_log_cf,
    truncated_moment,
    truncated_moment_expansion,
)
from randprod.experiments import step_lattice_diagnostic, step_phase_diagram, step_simulate
from randprod.laws import stable_scale
from randprod.ldev import stable_bn

THREADS = os.cpu_count() or 1
LU, GA, BE = LogUniform(), Gaussian(0, 1), LatticeBernoulli(0.5, 1)
_capsys = None


def report(k: int, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
    if _capsys is not None:
        with _capsys.disabled():
            print("\n" + line)
    else:
        print(line)
    assert ok, line


@pytest.fixture(autouse=True)
def _visible(capsys):
    global _capsys
    _capsys = capsys
    yield
    _capsys = None


def test_criterion_01_critical_points():
    t = time.perf_counter()
    lu, ga = RateFunction(LU), RateFunction(GA)
    got = [lu.c1, lu.c2, ga.c1, ga.c2]
    want = [math.log(2) - 0.5, math.log(3) - 2 / 3, 0.5, 2.0]
    err = max(abs(g / w - 1) for g, w in zip(got, want))
    dt = time.perf_counter() - t
    report(1, err <= 1e-10 and dt < 1, f"max rel err {err:.2e} (<= 1e-10), {dt:.3f} s")


def test_criterion_02_legendre_duality():
    t = time.perf_counter()
    worst_i = worst_p = 0.0
    for m in (LU, GA, BE):
        rf = RateFunction(m)
        for a in np.geomspace(0.05, 20, 30):
            beta = float(m.dphi(a))
            if not m.beta0 < beta < m.beta_inf:
                continue
            g = a * beta - float(m.phi(a))
            worst_i = max(worst_i, abs(rf.rate(beta) / g - 1))
            worst_p = max(worst_p, abs(rf.rate_prime(beta) / a - 1))
    dt = time.perf_counter() - t
    ok = worst_i <= 1e-8 and worst_p <= 1e-8 and dt < 1
    report(2, ok, f"I rel err {worst_i:.2e}, I' rel err {worst_p:.2e} (<= 1e-8), {dt:.3f} s")


def test_criterion_03_bahadur_rao():
    t = time.perf_counter()
    rg = math.exp(bahadur_rao_tail(GA, 1.0, 400).log_value - stats.norm.logsf(20.0))
    rp = math.exp(lattice_point_mass(BE, 0.7, 500).log_value - stats.binom.logpmf(350, 500, 0.5))
    rt = math.exp(lattice_tail(BE, 0.7, 500).log_value - stats.binom.logsf(349, 500, 0.5))
    dt = time.perf_counter() - t
    ok = abs(rg - 1) <= 0.01 and abs(rp - 1) <= 0.02 and abs(rt - 1) <= 0.02 and dt < 1
    report(3, ok, f"Gaussian ratio {rg:.4f} (1%), lattice mass {rp:.4f}, tail {rt:.4f} (2%), {dt:.3f} s")


def test_criterion_04_importance_sampling():
    t = time.perf_counter()
    g = estimate_tail_is(GA, 1.0, 100, 100_000, seed=31, threads=THREADS)
    b = estimate_tail_is(BE, 0.7, 200, 100_000, seed=32, threads=THREADS)
    zg = (g.mean - stats.norm.sf(10.0)) / g.stderr
    zb = (b.mean - stats.binom.sf(139, 200, 0.5)) / b.stderr
    dt = time.perf_counter() - t
    ok = abs(zg) <= 4 and abs(zb) <= 4 and g.rel_err < 0.01 and b.rel_err < 0.01 and dt < 10
    report(
        4,
        ok,
        f"z = {zg:+.2f} / {zb:+.2f} (|z| <= 4), stderr/mean = {g.rel_err:.4f} / {b.rel_err:.4f} (< 0.01), {dt:.1f} s",
    )


def test_criterion_05_truncated_moments():
    t = time.perf_counter()
    ok = True
    parts = []
    for a in (0.5, 1.0, 2.0):
        dev = [abs(truncated_moment(GA, a, stable_bn(GA, a, n), n, mode="ExactTilt") - 0.5) for n in (100, 1000, 10_000)]
        ok &= dev[0] > dev[1] > dev[2]
        ratios = []
        for n in (100, 1000, 10_000):
            e = [
                abs(truncated_moment(GA, a, stable_bn(GA, a, k), k) - truncated_moment_expansion(GA, a, stable_bn(GA, a, k), k))
                for k in (n, 4 * n)
            ]
            ratios.append(e[0] / e[1])
        ok &= min(ratios) > 2
        parts.append(f"a={a}: min err ratio {min(ratios):.2f}")
    dt = time.perf_counter() - t
    report(5, bool(ok) and dt < 1, "|M-1/2| decreasing; " + ", ".join(parts) + f" (> 2), {dt:.3f} s")


def test_criterion_06_clt():
    r = step_simulate("loguniform", 0.6, 15, 2000, 20240601, threads=THREADS).metrics
    report(6, r["ks"] <= 0.05, f"KS {r['ks']:.4f} (<= 0.05), N={r['N']}")


def test_criterion_07_critical():
    c2 = RateFunction(LU).c2
    r = step_simulate("loguniform", c2, 15, 2000, 20240602, threads=THREADS).metrics
    ok = r["ks"] <= 0.05 and 0.40 <= r["var"] <= 0.62
    report(7, ok, f"KS {r['ks']:.4f} (<= 0.05), var {r['var']:.3f} (in [0.40, 0.62])")


def test_criterion_08_stable():
    r = step_simulate("loguniform", 0.3, 30, 2000, 20240603, threads=THREADS).metrics
    report(8, r["ks"] <= 0.07, f"KS {r['ks']:.4f} (<= 0.07) vs {r['law']}")


def test_criterion_09_boundary():
    r = step_simulate("gaussian:mu=0,sigma=1", 0.5, 30, 1000, 20240604, threads=THREADS).metrics
    report(9, r["ks"] <= 0.08, f"KS {r['ks']:.4f} (<= 0.08) vs {r['law']}")


def test_criterion_10_lattice():
    kw = dict(delta_target=0.5, window=0.05)
    r = step_simulate("bernoulli:p=0.5,h=1", 0.05, 600, 1000, 20240605, threads=THREADS, **kw).metrics
    d = step_lattice_diagnostic("bernoulli:p=0.5,h=1", 0.05, 600, [1, 2, 3], **kw).metrics
    ok = r["ks"] <= 0.10 and d["max_rel_dev"] <= 0.10 and abs(r["delta_n"] - 0.5) < 0.05
    report(
        10,
        ok,
        f"n={r['n']} Delta_n={r['delta_n']:.3f}, KS {r['ks']:.4f} (<= 0.10), mass diagnostic max dev {d['max_rel_dev']:.3f} (<= 0.10)",
    )


def test_criterion_11_weak_lln():
    c1 = RateFunction(LU).c1
    above = step_simulate("loguniform", c1 + 0.2, 25, 500, 20240606, "LLN", threads=THREADS).metrics
    at = step_simulate("loguniform", c1, 30, 500, 20240608, "LLN", threads=THREADS).metrics
    ok = abs(above["mean"] - 1) <= 0.1 and abs(at["corrected_mean"] - 0.5) <= 0.1
    report(
        11,
        ok,
        f"mean {above['mean']:.4f} at c1+0.2 (1 +- 0.1), corrected mean {at['corrected_mean']:.4f} at c1 (0.5 +- 0.1)",
    )


def test_criterion_12_free_energy():
    grid = [0.05, 0.1, RateFunction(LU).c1, 0.25, 0.3]
    g30 = step_phase_diagram("loguniform", grid, 30, 8, 20240607, threads=THREADS)
    g60 = step_phase_diagram("loguniform", grid, 60, 8, 20240607, threads=THREADS)
    gaps30 = [row[5] for row in g30.rows]
    gaps60 = [row[5] for row in g60.rows]
    # the grid gap is the largest one; per-c gaps near zero sit at Monte Carlo noise
    ok = max(gaps60) <= 0.1 and max(gaps60) < max(gaps30)
    per_c = ", ".join(f"{a:.3f}->{b:.3f}" for a, b in zip(gaps30, gaps60))
    report(12, ok, f"max gap {max(gaps30):.3f} -> {max(gaps60):.3f} (<= 0.1, decreasing); per c: {per_c}")


def test_criterion_13_stable_invariants():
    t = time.perf_counter()
    worst_id, worst_mod = 0.0, -math.inf
    alphas = [0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.7, 1.9]
    us = np.array([-3.0, -1.0, -0.3, 0.3, 1.0, 3.0])
    for a in alphas:
        lhs = 2 * stable_log_cf(a, us)
        rhs = stable_log_cf(a, 2 ** (1 / a) * us)
        worst_id = max(worst_id, float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(lhs)))))
        worst_mod = max(worst_mod, float(np.max(np.real(stable_log_cf(a, np.linspace(-50, 50, 1001))))))
        assert stable_scale(a) > 0
    dt = time.perf_counter() - t
    ok = worst_id <= 1e-12 and worst_mod <= 0.0 and dt < 1
    report(13, ok, f"identity err {worst_id:.1e} (<= 1e-12), max log|cf| {worst_mod:.1e} (<= 0), {dt:.3f} s")


def test_criterion_14_determinism(tmp_path):
    from randprod.cli import main

    blobs = []
    for th in (1, 2, 8):
        f = tmp_path / f"t{th}.csv"
        argv = ["simulate", "--model", "loguniform", "--c", "0.3", "--n", "20", "--reps", "64"]
        main(argv + ["--seed", "14", "--threads", str(th), "--out", str(f)])
        blobs.append(f.read_bytes())
    same = blobs[0] == blobs[1] == blobs[2]
    # and through the library with a lattice model
    v = [simulate_statistic(SimConfig("bernoulli:p=0.5,h=1", 0.1, 40, 32, 14, threads=th)).values for th in (1, 5)]
    same &= np.array_equal(v[0], v[1])
    report(14, same, "CSV bitwise identical across threads 1/2/8" if same else "outputs differ across thread counts")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
