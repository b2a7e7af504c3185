"""Experiment steps, the phase diagram and recipe execution.

Every step returns a :class:`StepResult`: a CSV table plus a flat dict of
scalar metrics.  Recipes (package data ``recipes.json``) chain steps and
declare tolerances on their metrics; :func:`run_recipe` writes the tables
and a JSON report with one verdict per declared tolerance.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DomainError, RandprodError, UnsupportedError
from .laws import LawKind, LimitLaw
from .ldev import (
    c1_braces,
    chernoff_bound,
    default_N,
    estimate_tail_is,
    exact_log_tail,
    lattice_mass_diagnostic,
    tail_asymptotic,
)
from .limits import RegimeTag, classify, select_lattice_n
from .models import parse_model
from .rate import RateFunction, free_energy_limit
from .simulate import (
    DEFAULT_MAX_OPS,
    SimConfig,
    Statistic,
    convergence_table,
    ks_distance,
    sample_limit_law,
    simulate_statistic,
)

SCHEMA_VERSION = 1

# CSV column sets, part of the output contract
COLUMNS = {
    "criticals": ("model", "c1", "c2", "c_inf"),
    "rate-table": ("beta", "I", "alpha"),
    "lawcdf": ("x", "F"),
    "simulate": ("replicate", "value"),
    "tail-check": ("n", "beta", "alpha", "asymptotic", "chernoff", "is_mean", "is_stderr", "exact"),
    "phase-diagram": ("c", "regime", "alpha", "limit", "sim_mean", "gap"),
    "convergence": ("n", "N", "mean", "sd", "ks", "limit"),
    "lattice-diagnostic": ("k", "x", "NP", "target", "ratio"),
}


@dataclass
class StepResult:
    kind: str
    rows: list[tuple]
    metrics: dict = field(default_factory=dict)

    @property
    def columns(self):
        return COLUMNS[self.kind]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return ""
        return repr(v)
    if v is None:
        return ""
    return str(v)


def _model(spec):
    return parse_model(spec) if isinstance(spec, str) else spec


# steps -----------------------------------------------------------------------


def step_criticals(model) -> StepResult:
    m = _model(model)
    rf = RateFunction(m)
    return StepResult("criticals", [(m.name, rf.c1, rf.c2, rf.c_inf)], {"c1": rf.c1, "c2": rf.c2, "c_inf": rf.c_inf})


def step_rate_table(model, betas) -> StepResult:
    rf = RateFunction(_model(model))
    return StepResult("rate-table", rf.table(betas))


def parse_law(spec: str) -> LimitLaw:
    """``normal01``, ``normalhalf``, ``stable:alpha=1.5`` or ``lattice:alpha=0.5,delta=0.2,h=1``."""
    name, _, rest = spec.strip().partition(":")
    kv = {}
    for part in filter(None, rest.split(",")):
        k, _, v = part.partition("=")
        try:
            kv[k.strip().lower()] = float(v)
        except ValueError:
            raise DomainError(f"bad law parameter {part!r}") from None
    name = name.lower()
    if name in ("normal01", "normal"):
        return LimitLaw(LawKind.NORMAL01)
    if name in ("normalhalf", "normal_half"):
        return LimitLaw(LawKind.NORMAL_HALF)
    if name in ("stable", "stableskewed"):
        return LimitLaw(LawKind.STABLE, alpha=kv["alpha"])
    if name in ("lattice", "latticeid"):
        return LimitLaw(LawKind.LATTICE_ID, alpha=kv["alpha"], Delta=kv.get("delta", 0.0), h=kv.get("h", 1.0))
    raise DomainError(f"unknown law {spec!r}")


def step_lawcdf(law, grid) -> StepResult:
    law = parse_law(law) if isinstance(law, str) else law
    xs = np.asarray(grid, dtype=float)
    F = np.atleast_1d(law.cdf(xs))
    return StepResult("lawcdf", list(zip(xs.tolist(), F.tolist())))


def step_simulate(
    model,
    c,
    n,
    reps,
    seed,
    stat="NormalizedZ",
    N=None,
    threads=1,
    max_ops=DEFAULT_MAX_OPS,
    c1_centering="expansion",
    delta_target=None,
    n_min=None,
    window=None,
) -> StepResult:
    """Simulate a statistic; with ``delta_target`` the lattice n is chosen by subsequence selection."""
    m = _model(model)
    if delta_target is not None:
        n = select_lattice_n(m, c, delta_target, n if n_min is None else n_min, window)
    cfg = SimConfig(m, c, int(n), int(reps), int(seed), stat, N, threads, max_ops, c1_centering)
    ss = simulate_statistic(cfg)
    v = ss.values
    metrics = {
        "n": int(n),
        "N": cfg.N,
        "mean": float(np.mean(v)),
        "median": float(np.median(v)),
        "var": float(np.var(v, ddof=1)) if len(v) > 1 else math.nan,
        "wall_time": ss.wall_time,
    }
    if ss.norm is not None:
        metrics["log_A"] = ss.norm.log_A
        metrics["log_B"] = ss.norm.log_B
        if ss.norm.delta_n is not None:
            metrics["delta_n"] = ss.norm.delta_n
    rf = RateFunction(m)
    if cfg.statistic is Statistic.LLN and abs(c - rf.c1) <= 1e-9 * max(1.0, rf.c1) and not m.is_lattice:
        # finite-n factor of the expanded centering: A_n / (N e^{phi(1) n}) = braces / 2
        br = c1_braces(m, int(n))
        metrics["braces"] = br
        metrics["corrected_mean"] = metrics["mean"] / br
        metrics["corrected_median"] = metrics["median"] / br
    if cfg.statistic is Statistic.NORMALIZED_Z:
        try:
            law = sample_limit_law(ss)
            metrics["law"] = law.describe()
            metrics["ks"] = ks_distance(ss, law.cdf)
        except UnsupportedError:
            pass
    return StepResult("simulate", list(enumerate(v.tolist())), metrics)


def step_tail_check(model, beta, n, reps, seed, threads=1) -> StepResult:
    m = _model(model)
    rf = RateFunction(m)
    alpha = rf.alpha_of_beta(beta)
    asym = tail_asymptotic(m, beta, n)
    ch = chernoff_bound(m, beta, n)
    est = estimate_tail_is(m, beta, n, reps, seed, threads)
    try:
        exact = math.exp(exact_log_tail(m, beta, n))
    except UnsupportedError:
        exact = math.nan
    metrics = {"asymptotic": asym.value, "is_mean": est.mean, "is_stderr": est.stderr, "is_rel_err": est.rel_err}
    if not math.isnan(exact):
        metrics["exact"] = exact
        metrics["asymptotic_ratio"] = asym.value / exact
        metrics["is_z"] = (est.mean - exact) / est.stderr if est.stderr > 0 else math.inf
    row = (n, beta, alpha, asym.value, ch.value, est.mean, est.stderr, exact)
    return StepResult("tail-check", [row], metrics)


def phase_diagram(model, c_grid, n: int, reps: int, seed: int, threads: int = 1, max_ops: float = DEFAULT_MAX_OPS):
    """Per c: regime, alpha, free-energy limit, simulated mean and gap.

    ``reps = 0`` skips the simulation (mean and gap come back as nan).
    """
    m = _model(model)
    rf = RateFunction(m)
    rows = []
    for c in c_grid:
        c = float(c)
        if not 0 < c < rf.c_inf:
            raise DomainError(f"c={c} outside (0, c_inf={rf.c_inf})")
        reg = classify(rf, c)
        lim = free_energy_limit(rf, c)
        mean = gap = math.nan
        if reps > 0:
            ss = simulate_statistic(SimConfig(m, c, n, reps, seed, Statistic.FREE_ENERGY, threads=threads, max_ops=max_ops))
            mean = float(np.mean(ss.values))
            gap = abs(mean - lim)
        rows.append((c, reg.tag.value, reg.alpha if reg.alpha is not None else math.nan, lim, mean, gap))
    return rows


def _regimes_coherent(rf, rows) -> bool:
    """Tags agree with the c-vs-(c1, c2) comparison on every row."""
    eq = lambda a, b: abs(a - b) <= 1e-9 * max(1.0, b)  # noqa: E731
    for c, tag, *_ in rows:
        if eq(c, rf.c2):
            want = RegimeTag.CRITICAL
        elif c > rf.c2:
            want = RegimeTag.SUPERCRITICAL
        elif eq(c, rf.c1):
            want = RegimeTag.STABLE_BOUNDARY
        else:
            want = RegimeTag.STABLE_HIGH if c > rf.c1 else RegimeTag.STABLE_LOW
        if tag != want.value:
            return False
    return True


def step_phase_diagram(model, c_grid, n, reps, seed, threads=1, max_ops=DEFAULT_MAX_OPS) -> StepResult:
    m = _model(model)
    rf = RateFunction(m)
    rows = phase_diagram(m, c_grid, n, reps, seed, threads, max_ops)
    gaps = [r[5] for r in rows]
    metrics = {"regimes_coherent": _regimes_coherent(rf, rows), "c1": rf.c1, "c2": rf.c2}
    if reps > 0:
        metrics["max_gap"] = float(max(gaps))
    return StepResult("phase-diagram", rows, metrics)


def step_convergence(model, c, n_list, stat, reps, seed, threads=1, max_ops=DEFAULT_MAX_OPS) -> StepResult:
    rows = convergence_table(_model(model), c, n_list, stat, reps, seed, threads, max_ops)
    tup = [tuple(r[k] for k in COLUMNS["convergence"]) for r in rows]
    metrics = {"last_mean": rows[-1]["mean"], "limit": rows[-1]["limit"]}
    if not math.isnan(rows[-1]["limit"]):
        errs = [abs(r["mean"] - r["limit"]) for r in rows]
        metrics["last_gap"] = errs[-1]
        metrics["gap_decreasing"] = all(b < a for a, b in zip(errs, errs[1:]))
    if not math.isnan(rows[-1]["ks"]):
        metrics["last_ks"] = rows[-1]["ks"]
    return StepResult("convergence", tup, metrics)


def step_lattice_diagnostic(model, c, n, ks, delta_target=None, n_min=None, window=None) -> StepResult:
    m = _model(model)
    if delta_target is not None:
        n = select_lattice_n(m, c, delta_target, n if n_min is None else n_min, window)
    rows = []
    for k, (x, p, t) in zip(ks, lattice_mass_diagnostic(m, c, int(n), ks)):
        rows.append((int(k), x, p, t, p / t))
    dev = max(abs(r[4] - 1) for r in rows)
    return StepResult("lattice-diagnostic", rows, {"n": int(n), "N": default_N(c, int(n)), "max_rel_dev": dev})


STEPS = {
    "criticals": step_criticals,
    "rate-table": step_rate_table,
    "lawcdf": step_lawcdf,
    "simulate": step_simulate,
    "tail-check": step_tail_check,
    "phase-diagram": step_phase_diagram,
    "convergence": step_convergence,
    "lattice-diagnostic": step_lattice_diagnostic,
}

# recipes ---------------------------------------------------------------------


def load_recipes() -> dict:
    text = resources.files("randprod").joinpath("recipes.json").read_text()
    return json.loads(text)


def check_metric(value, check: dict, metrics: dict | None = None) -> bool:
    """Evaluate one tolerance declaration against a metric value.

    Keys: ``equals``; ``target`` with ``rel_tol`` and/or ``abs_tol``;
    ``min``; ``max``; ``max_metric`` (bounded by another metric).
    """
    if value is None:
        return False
    if "equals" in check:
        return value == check["equals"]
    v = float(value)
    if math.isnan(v):
        return False
    ok = True
    if "target" in check:
        t = float(check["target"])
        if "rel_tol" in check:
            ok &= abs(v - t) <= check["rel_tol"] * abs(t)
        if "abs_tol" in check:
            ok &= abs(v - t) <= check["abs_tol"]
    if "min" in check:
        ok &= v >= check["min"]
    if "max" in check:
        ok &= v <= check["max"]
    if "max_metric" in check:
        other = (metrics or {}).get(check["max_metric"])
        ok &= other is not None and v <= float(other)
    return bool(ok)


def _json_safe(v):
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def run_recipe(name: str, out_dir, threads: int = 1, max_ops: float | None = None, recipes: dict | None = None) -> dict:
    """Run a named recipe, writing ``<step>.csv`` files and ``report.json``.

    Returns the report.  ``passed`` is true iff every declared tolerance
    holds.  A failing step stops the recipe; the partial report is written
    with the error message.
    """
    book = load_recipes() if recipes is None else recipes
    if name not in book:
        raise DomainError(f"unknown recipe {name!r}; known: {', '.join(sorted(book))}")
    recipe = book[name]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {"schema": SCHEMA_VERSION, "recipe": name, "description": recipe.get("description", ""), "steps": []}
    metrics: dict[str, object] = {}
    t_all = time.perf_counter()
    error = None
    for step in recipe["steps"]:
        args = dict(step.get("args", {}))
        if step["op"] in ("simulate", "tail-check", "phase-diagram", "convergence"):
            args.setdefault("threads", threads)
        if max_ops is not None and step["op"] in ("simulate", "phase-diagram", "convergence"):
            args["max_ops"] = max_ops
        t0 = time.perf_counter()
        try:
            res = STEPS[step["op"]](**args)
        except (RandprodError, ValueError, ArithmeticError, RuntimeError) as exc:
            error = f"step {step['id']}: {type(exc).__name__}: {exc}"
            report["steps"].append({"id": step["id"], "op": step["op"], "error": error})
            break
        fname = f"{step['id']}.csv"
        (out / fname).write_text(res.to_csv())
        for k, v in res.metrics.items():
            metrics[f"{step['id']}.{k}"] = v
        report["steps"].append(
            {
                "id": step["id"],
                "op": step["op"],
                "args": args,
                "output": fname,
                "metrics": res.metrics,
                "wall_time": time.perf_counter() - t0,
            }
        )
    verdicts = []
    for chk in recipe.get("checks", []):
        val = metrics.get(chk["metric"])
        verdicts.append({**chk, "value": val, "pass": error is None and check_metric(val, chk, metrics)})
    report["checks"] = verdicts
    report["error"] = error
    report["passed"] = error is None and all(v["pass"] for v in verdicts)
    report["wall_time"] = time.perf_counter() - t_all
    (out / "report.json").write_text(json.dumps(_json_safe(report), indent=2) + "\n")
    return report
