"""Command-line front end: ``randprod <subcommand> ...``.

Tables go to ``--out`` (a file, or a directory for ``recipe``) or stdout.
Exit status is 0 on success, 1 when a declared tolerance fails and 2 on
usage or domain errors.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import RandprodError
from .experiments import (
    load_recipes,
    run_recipe,
    step_criticals,
    step_lawcdf,
    step_phase_diagram,
    step_rate_table,
    step_simulate,
    step_tail_check,
)
from .models import parse_model
from .limits import classify, normalization
from .ldev import default_N
from .rate import RateFunction
from .simulate import DEFAULT_MAX_OPS


def parse_grid(spec: str) -> np.ndarray:
    """``lo:hi:num`` (inclusive linspace) or a comma list."""
    if ":" in spec:
        lo, hi, num = spec.split(":")
        return np.linspace(float(lo), float(hi), int(num))
    return np.array([float(v) for v in spec.split(",") if v.strip()])


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "NA"
    return repr(float(v)) if isinstance(v, float) else str(v)


def cmd_criticals(a):
    text = step_criticals(a.model).to_csv()
    if a.betas != "none":
        if a.betas == "auto":
            # phi'(alpha) on a log grid of tilts covers the open range for any model
            m = parse_model(a.model)
            betas = np.asarray(m.dphi(np.geomspace(0.1, 10.0, 9)), dtype=float)
        else:
            betas = parse_grid(a.betas)
        text += "\n" + step_rate_table(a.model, betas).to_csv()
    _emit(text, a.out)
    return 0


def cmd_rate_table(a):
    _emit(step_rate_table(a.model, parse_grid(a.betas)).to_csv(), a.out)
    return 0


def cmd_limit(a):
    m = parse_model(a.model)
    rf = RateFunction(m)
    reg = classify(rf, a.c)
    N = a.N if a.N is not None else default_N(a.c, a.n)
    nm = normalization(rf, a.c, a.n, N, a.c1_centering)
    lines = [
        f"model: {m.name}",
        f"c: {a.c!r}",
        f"n: {a.n}",
        f"N: {N}",
        f"regime: {reg.tag.value}",
        f"lattice: {str(reg.is_lattice).lower()}",
        f"alpha: {_fmt(reg.alpha)}",
        f"beta: {_fmt(reg.beta)}",
        f"log_A: {_fmt(nm.log_A)}",
        f"log_B: {_fmt(nm.log_B)}",
        f"b_n: {_fmt(nm.b_n)}",
        f"delta_n: {_fmt(nm.delta_n)}",
    ]
    _emit("\n".join(lines) + "\n", a.out)
    return 0


def cmd_lawcdf(a):
    _emit(step_lawcdf(a.kind, parse_grid(a.grid)).to_csv(), a.out)
    return 0


def cmd_simulate(a):
    res = step_simulate(
        a.model, a.c, a.n, a.reps, a.seed, a.stat, a.N, a.threads, a.max_ops, a.c1_centering
    )
    _emit(res.to_csv(), a.out)
    return 0


def cmd_tail_check(a):
    _emit(step_tail_check(a.model, a.beta, a.n, a.reps, a.seed, a.threads).to_csv(), a.out)
    return 0


def cmd_phase_diagram(a):
    res = step_phase_diagram(a.model, parse_grid(a.c_grid), a.n, a.reps, a.seed, a.threads, a.max_ops)
    _emit(res.to_csv(), a.out)
    return 0


def cmd_recipe(a):
    if a.list:
        for name, r in sorted(load_recipes().items()):
            print(f"{name}: {r.get('description', '')}")
        return 0
    if not a.name:
        raise RandprodError("recipe name required")
    out = a.out or f"out-{a.name}"
    report = run_recipe(a.name, out, threads=a.threads, max_ops=a.max_ops)
    for chk in report["checks"]:
        flag = "PASS" if chk["pass"] else "FAIL"
        print(f"{flag} {chk['metric']} = {chk['value']}")
    if report["error"]:
        print(f"ERROR {report['error']}", file=sys.stderr)
    print(f"report: {Path(out) / 'report.json'}")
    return 0 if report["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=20240601, help="master seed")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--max-ops", type=float, default=DEFAULT_MAX_OPS, help="random-draw budget")
    common.add_argument("--out", default=None, help="output file (directory for recipe)")

    p = argparse.ArgumentParser(prog="randprod", description="Limit laws for sums of random products.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("criticals", parents=[common], help="critical points c1, c2 and a rate table")
    s.add_argument("--model", required=True)
    s.add_argument("--betas", default="auto", help="lo:hi:num, comma list, auto or none")
    s.set_defaults(fn=cmd_criticals)

    s = sub.add_parser("rate-table", parents=[common], help="tabulate I(beta)")
    s.add_argument("--model", required=True)
    s.add_argument("--betas", required=True, help="lo:hi:num or comma list")
    s.set_defaults(fn=cmd_rate_table)

    s = sub.add_parser("limit", parents=[common], help="regime and normalizing constants")
    s.add_argument("--model", required=True)
    s.add_argument("--c", type=float, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--N", type=int, default=None)
    s.add_argument("--c1-centering", choices=("expansion", "truncated"), default="expansion")
    s.set_defaults(fn=cmd_limit)

    s = sub.add_parser("lawcdf", parents=[common], help="CDF of a limit law on a grid")
    s.add_argument("--kind", required=True, help="normal01 | normalhalf | stable:alpha=a | lattice:alpha=a,delta=d,h=h")
    s.add_argument("--grid", required=True, help="lo:hi:num or comma list")
    s.set_defaults(fn=cmd_lawcdf)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo replicates of a statistic")
    s.add_argument("--model", required=True)
    s.add_argument("--c", type=float, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--reps", type=int, required=True)
    s.add_argument("--stat", default="NormalizedZ", help="NormalizedZ | FreeEnergy | LLN | MaxRate")
    s.add_argument("--N", type=int, default=None, help="override round(e^{cn})")
    s.add_argument("--c1-centering", choices=("expansion", "truncated"), default="expansion")
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("tail-check", parents=[common], help="tail asymptotics vs importance sampling")
    s.add_argument("--model", required=True)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--reps", type=int, default=100_000)
    s.set_defaults(fn=cmd_tail_check)

    s = sub.add_parser("phase-diagram", parents=[common], help="free energy across c")
    s.add_argument("--model", required=True)
    s.add_argument("--c-grid", required=True, help="lo:hi:num or comma list")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--reps", type=int, default=8, help="0 skips simulation")
    s.set_defaults(fn=cmd_phase_diagram)

    s = sub.add_parser("recipe", parents=[common], help="run a bundled experiment recipe")
    s.add_argument("name", nargs="?")
    s.add_argument("--list", action="store_true", help="list recipes")
    s.set_defaults(fn=cmd_recipe)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    try:
        return a.fn(a)
    except (RandprodError, ValueError, ArithmeticError) as exc:
        print(f"randprod: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
