"""Dynamic borrowing of external controls.

Data-driven discounting of an external control sample (maximum marginal
likelihood and minimum-MSE rules), Bayesian-bootstrap posterior inference
with optional inverse-probability pre-weighting, and a Monte-Carlo harness
for frequentist operating characteristics.
"""

from ._kernels import BACKEND as kernel_backend
from .bboot import (
    BootstrapConfig,
    IntervalEstimate,
    IntervalMethod,
    PosteriorDraws,
    bb_replicate,
    dirichlet_weights,
    interval,
    plugin_estimate,
    run,
    run_many,
)
from .core import (
    CausalEstimand,
    ControlSample,
    DatasetError,
    DegenerateSample,
    DegenerateVariance,
    DegenerateVarianceWarning,
    DegenerateWeights,
    DynborrowError,
    InvalidConfig,
    InvalidCounts,
    InvalidGrid,
    InvalidWeight,
    OutcomeKind,
    SeparationWarning,
    SingularDesign,
    SummaryStats,
    binary_summary_beta,
    binary_summary_plugin,
    summarize,
)
from .ipw import BalanceTable, PsModel, balance, fit_ps, ipw_weights
from .posterior import (
    BetaParams,
    CombinedEstimate,
    MseProfile,
    bias_at_optimum,
    combine,
    combined_estimate,
    mse_profile,
    optimal_a,
    posterior_binomial,
    posterior_normal,
)
from .rules import (
    DEFAULT_GRID,
    BorrowAmount,
    BorrowingRule,
    RuleVariant,
    apply_cap,
    cminmse,
    evaluate,
    evaluate_batch,
    maxml_binomial,
    maxml_normal,
    minmse,
)
from .sim import MetricsRow, ScenarioConfig, gen_binary, gen_normal, gen_student_t, run_scenario

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "kernel_backend",
    # core
    "ControlSample", "SummaryStats", "CausalEstimand", "OutcomeKind",
    "summarize", "binary_summary_beta", "binary_summary_plugin",
    "DynborrowError", "DegenerateSample", "DegenerateWeights",
    "DegenerateVariance", "InvalidCounts", "InvalidGrid", "InvalidWeight",
    "InvalidConfig", "SingularDesign", "DatasetError",
    "SeparationWarning", "DegenerateVarianceWarning",
    # rules
    "BorrowingRule", "RuleVariant", "BorrowAmount", "DEFAULT_GRID",
    "apply_cap", "maxml_normal", "maxml_binomial", "cminmse", "minmse",
    "evaluate", "evaluate_batch",
    # posterior
    "CombinedEstimate", "MseProfile", "BetaParams", "combine",
    "combined_estimate", "mse_profile", "optimal_a", "bias_at_optimum",
    "posterior_normal", "posterior_binomial",
    # ipw
    "PsModel", "BalanceTable", "fit_ps", "ipw_weights", "balance",
    # bboot
    "BootstrapConfig", "IntervalMethod", "IntervalEstimate", "PosteriorDraws",
    "dirichlet_weights", "bb_replicate", "run", "run_many",
    "plugin_estimate", "interval",
    # sim
    "ScenarioConfig", "MetricsRow", "run_scenario",
    "gen_normal", "gen_binary", "gen_student_t",
]
