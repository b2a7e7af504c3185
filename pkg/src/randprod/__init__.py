"""Limit laws for sums of independent random products.

``Z_n = sum_{i <= N_n} prod_{j <= n} e^{X_{i,j}}`` with ``N_n ~ e^{cn}``:
rate functions and critical points, regime classification, normalizing
sequences, limit-law distribution functions and a Monte Carlo engine that
checks them.
"""

from .errors import (
    BudgetExceededError,
    ConvergenceError,
    DomainError,
    NTooSmallError,
    OffLatticeError,
    QuadratureError,
    RandprodError,
    UnsupportedError,
)
from .laws import (
    LawKind,
    LimitLaw,
    lattice_id_cdf,
    lattice_id_log_cf,
    lattice_shift_constant,
    stable_cdf,
    stable_log_cf,
)
from .ldev import (
    ISEstimate,
    TailAsymptotic,
    TailKind,
    an_expansion_c1,
    bahadur_rao_tail,
    chernoff_bound,
    diagnostic_tau_tail,
    edgeworth_cdf,
    estimate_tail_is,
    lattice_mass_diagnostic,
    lattice_point_mass,
    lattice_tail,
    truncated_moment,
    truncated_moment_expansion,
)
from .limits import Normalization, Regime, RegimeTag, classify, limit_law, normalization, select_lattice_n
from .models import (
    CustomModel,
    DistributionModel,
    Gaussian,
    Lattice,
    LatticeBernoulli,
    LogBeta,
    LogUniform,
    parse_model,
)
from .rate import RateFunction, free_energy_limit
from .simulate import SampleSet, SimConfig, Statistic, convergence_table, ks_distance, simulate_statistic

__version__ = "0.1.0"
