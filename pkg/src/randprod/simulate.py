"""Monte Carlo simulation of Z_n and its derived statistics.

Each replicate owns the random stream ``substream(master_seed, r)``, so the
output is a pure function of the configuration no matter how replicates are
spread over threads.  The ``N_n`` values of ``S_{i,n}`` are never held in
memory together: they are drawn in chunks and folded into a running
shifted log-sum-exp.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .errors import BudgetExceededError, DomainError, UnsupportedError
from .laws import LimitLaw
from .ldev import default_N
from .limits import Normalization, Regime, RegimeTag, classify, limit_law, normalization
from .models import DistributionModel, parse_model
from .rate import RateFunction, free_energy_limit
from .streams import replicate_seed, substream

CHUNK = 65536
DEFAULT_MAX_OPS = 5e9


class Statistic(str, Enum):
    NORMALIZED_Z = "NormalizedZ"
    FREE_ENERGY = "FreeEnergy"
    LLN = "LLN"
    MAX_RATE = "MaxRate"

    @classmethod
    def parse(cls, s) -> Statistic:
        if isinstance(s, cls):
            return s
        key = str(s).replace("-", "").replace("_", "").lower()
        for m in cls:
            if m.value.lower() == key:
                return m
        raise DomainError(f"unknown statistic {s!r}")


@dataclass
class SimConfig:
    """One simulation experiment.

    ``model`` is either a spec string (see :func:`parse_model`) or a model
    instance.  ``N_override`` replaces ``round(e^{cn})``.
    """

    model: str | DistributionModel
    c: float
    n: int
    replicates: int
    master_seed: int
    statistic: Statistic | str = Statistic.NORMALIZED_Z
    N_override: int | None = None
    threads: int = 1
    max_ops: float = DEFAULT_MAX_OPS
    c1_centering: str = "expansion"

    def __post_init__(self):
        self.statistic = Statistic.parse(self.statistic)
        if self.replicates < 1:
            raise DomainError("replicates must be >= 1")
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if not self.c > 0:
            raise DomainError("c must be positive")
        if self.N_override is not None and self.N_override < 1:
            raise DomainError("N must be >= 1")

    @property
    def model_obj(self) -> DistributionModel:
        return parse_model(self.model) if isinstance(self.model, str) else self.model

    @property
    def N(self) -> int:
        return default_N(self.c, self.n) if self.N_override is None else int(self.N_override)

    def echo(self) -> dict:
        d = asdict(self)
        d["model"] = self.model if isinstance(self.model, str) else self.model.name
        d["statistic"] = self.statistic.value
        d["N"] = self.N
        return d


@dataclass
class SampleSet:
    values: np.ndarray
    config: SimConfig
    wall_time: float
    regime: Regime | None = None
    norm: Normalization | None = None
    extra: dict = field(default_factory=dict)

    def seed_of(self, r: int) -> int:
        """Fingerprint of the stream used by replicate ``r``."""
        return replicate_seed(self.config.master_seed, r)

    def __len__(self):
        return len(self.values)


def uses_histogram(model: DistributionModel) -> bool:
    try:
        model.sum_histogram(np.random.default_rng(0), 1, 1)
    except UnsupportedError:
        return False
    return True


def op_count(model: DistributionModel, n: int, N: int, reps: int) -> float:
    """Random draws needed: one per S_{i,n} when sampled exactly, else n."""
    if uses_histogram(model):
        return float(reps) * (n + 1)
    return float(N) * reps * (1 if model.exact_sum else n)


def _fold(values: np.ndarray, weights=None):
    """(max, sum of weight * e^{v - max}) of one chunk; np.sum sums pairwise."""
    m = float(np.max(values))
    e = np.exp(values - m)
    t = float(np.sum(e if weights is None else weights * e))
    return m, t


def replicate_lse(model: DistributionModel, n: int, N: int, rng: np.random.Generator) -> tuple[float, float]:
    """``(M, T)`` with ``M = max_i S_{i,n}`` and ``sum_i e^{S_{i,n}} = e^M T``."""
    if uses_histogram(model):
        vals, counts = model.sum_histogram(rng, n, N)
        hit = counts > 0
        return _fold(vals[hit], counts[hit].astype(float))
    M, T = -math.inf, 0.0
    left = N
    while left > 0:
        k = min(CHUNK, left)
        m, t = _fold(np.asarray(model.sample_sum(rng, n, k), dtype=float))
        if m > M:
            T = T * math.exp(M - m) + t
            M = m
        else:
            T += t * math.exp(m - M)
        left -= k
    return M, T


@dataclass(frozen=True)
class _Plan:
    statistic: Statistic
    n: int
    N: int
    shift: float = 0.0  # statistic = e^{M - shift} T - offset for NormalizedZ / LLN
    offset: float = 0.0


def _plan(cfg: SimConfig, rf: RateFunction):
    m = rf.model
    n, N = cfg.n, cfg.N
    stat = cfg.statistic
    reg = norm = None
    if stat is Statistic.NORMALIZED_Z:
        reg = classify(rf, cfg.c)
        norm = normalization(rf, cfg.c, n, N, cfg.c1_centering)
        shift = norm.log_B
        offset = math.exp(norm.log_A - shift) if norm.log_A > -math.inf else 0.0
        return _Plan(stat, n, N, shift, offset), reg, norm
    if stat is Statistic.LLN:
        return _Plan(stat, n, N, float(m.phi(1.0)) * n + cfg.c * n), reg, norm
    return _Plan(stat, n, N), reg, norm


def _finish(plan: _Plan, M: float, T: float) -> float:
    if plan.statistic is Statistic.FREE_ENERGY:
        return (M + math.log(T)) / plan.n
    if plan.statistic is Statistic.MAX_RATE:
        return M / plan.n
    return math.exp(M - plan.shift) * T - plan.offset


def simulate_statistic(cfg: SimConfig) -> SampleSet:
    """Draw ``cfg.replicates`` independent values of the chosen statistic."""
    model = cfg.model_obj
    rf = RateFunction(model)
    ops = op_count(model, cfg.n, cfg.N, cfg.replicates)
    if ops > cfg.max_ops:
        raise BudgetExceededError(f"{ops:.3g} draws exceed the budget of {cfg.max_ops:.3g}")
    plan, reg, norm = _plan(cfg, rf)

    def one(r):
        M, T = replicate_lse(model, cfg.n, cfg.N, substream(cfg.master_seed, r))
        return _finish(plan, M, T)

    t0 = time.perf_counter()
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            vals = list(ex.map(one, range(cfg.replicates)))
    else:
        vals = [one(r) for r in range(cfg.replicates)]
    wall = time.perf_counter() - t0
    return SampleSet(np.asarray(vals, dtype=float), cfg, wall, reg, norm)


def ks_distance(sample, cdf) -> float:
    """Kolmogorov-Smirnov distance between a sample and a distribution function."""
    x = np.sort(np.asarray(sample.values if isinstance(sample, SampleSet) else sample, dtype=float))
    m = x.size
    if m == 0:
        raise DomainError("empty sample")
    if not callable(cdf):
        raise DomainError("cdf must be callable")
    F = np.asarray(cdf(x), dtype=float)
    if F.shape != x.shape:
        raise DomainError("cdf must map the sample elementwise")
    i = np.arange(1, m + 1)
    return float(np.max(np.maximum(np.abs(i / m - F), np.abs((i - 1) / m - F))))


def limit_value(rf: RateFunction, c: float, stat: Statistic) -> float:
    """Deterministic limit of a statistic, nan when there is none."""
    if stat is Statistic.FREE_ENERGY:
        return free_energy_limit(rf, c)
    if stat is Statistic.MAX_RATE:
        return rf.rate_inverse(c)
    if stat is Statistic.LLN:
        if abs(c - rf.c1) <= 1e-9 * max(1.0, rf.c1):
            return 0.5
        return 1.0 if c > rf.c1 else math.nan
    return math.nan


def sample_limit_law(sample: SampleSet) -> LimitLaw:
    cfg = sample.config
    delta = sample.norm.delta_n if sample.norm is not None else None
    return limit_law(cfg.model_obj, cfg.c, delta)


TABLE_COLUMNS = ("n", "N", "mean", "sd", "ks", "limit")


def convergence_table(
    model, c: float, n_list, statistic, reps: int, seed: int, threads: int = 1, max_ops: float = DEFAULT_MAX_OPS
) -> list[dict]:
    """One row per n: sample mean and sd, KS to the limit law, the limit value."""
    ns = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise DomainError("n_list must be increasing")
    stat = Statistic.parse(statistic)
    mobj = parse_model(model) if isinstance(model, str) else model
    rf = RateFunction(mobj)
    rows = []
    for n in ns:
        cfg = SimConfig(mobj, c, n, reps, seed, stat, threads=threads, max_ops=max_ops)
        ss = simulate_statistic(cfg)
        ks = math.nan
        if stat is Statistic.NORMALIZED_Z:
            try:
                ks = ks_distance(ss, sample_limit_law(ss).cdf)
            except UnsupportedError:
                pass
        rows.append(
            {
                "n": n,
                "N": cfg.N,
                "mean": float(np.mean(ss.values)),
                "sd": float(np.std(ss.values, ddof=1)) if len(ss) > 1 else math.nan,
                "ks": ks,
                "limit": limit_value(rf, c, stat),
            }
        )
    return rows


__all__ = [
    "CHUNK",
    "SampleSet",
    "SimConfig",
    "Statistic",
    "convergence_table",
    "ks_distance",
    "limit_value",
    "op_count",
    "replicate_lse",
    "sample_limit_law",
    "simulate_statistic",
    "RegimeTag",
]
