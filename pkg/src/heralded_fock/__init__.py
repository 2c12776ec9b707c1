"""Statistics of heralded photon-number-state preparation.

Models an unseeded OPA whose idler arm feeds a time-multiplexed
photon-number-resolving detector: detector click statistics, the Bayesian
posterior over the signal photon number, closed-form conditional moments,
Mandel-Q parameter maps over (gain, efficiency), and an event-level
Monte-Carlo oracle validating all of it.
"""

__version__ = "0.1.0"

from .analysis import QMapCell, QMapGrid, figure_data, invert_ml, q_map, threshold_eta
from .closed_form import (
    AppendixContext,
    PartialFractionForm,
    a_coeff,
    appendix_context,
    appendix_sums,
    beta_pf,
    cond_mean_single,
    cond_moments_multimode,
    cond_var_single,
    g_mu,
    g_mu_derivative,
)
from .detector import (
    DetectorConfig,
    click_table,
    det_prob,
    det_prob_exact,
    det_prob_ideal_limit,
    det_response_band,
)
from .errors import (
    InfeasibleEventError,
    InsufficientStatisticsError,
    NumericalAccuracyError,
    ThresholdNotFoundError,
    UndefinedQError,
)
from .herald import (
    HeraldedState,
    cond_moments_direct,
    herald_probability,
    herald_state,
    mandel_q,
    ml_estimate,
    ml_mse,
    posterior,
)
from .mc import EmpiricalPmf, McConfig, simulate_detection, simulate_herald
from .source import Pmf, SourceConfig, opa_pmf, opa_truncated

__all__ = [
    "AppendixContext",
    "DetectorConfig",
    "EmpiricalPmf",
    "HeraldedState",
    "InfeasibleEventError",
    "InsufficientStatisticsError",
    "McConfig",
    "NumericalAccuracyError",
    "PartialFractionForm",
    "Pmf",
    "QMapCell",
    "QMapGrid",
    "SourceConfig",
    "ThresholdNotFoundError",
    "UndefinedQError",
    "a_coeff",
    "appendix_context",
    "appendix_sums",
    "beta_pf",
    "click_table",
    "cond_mean_single",
    "cond_moments_direct",
    "cond_moments_multimode",
    "cond_var_single",
    "det_prob",
    "det_prob_exact",
    "det_prob_ideal_limit",
    "det_response_band",
    "figure_data",
    "g_mu",
    "g_mu_derivative",
    "herald_probability",
    "herald_state",
    "invert_ml",
    "mandel_q",
    "ml_estimate",
    "ml_mse",
    "opa_pmf",
    "opa_truncated",
    "posterior",
    "q_map",
    "simulate_detection",
    "simulate_herald",
    "threshold_eta",
]
