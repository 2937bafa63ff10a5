"""Posterior samplers and comparator estimators for normal means."""

from .chain import (
    FitSummary,
    McmcConfig,
    lasso_soft_threshold,
    method_label,
    pm_exact_posterior,
    run_chain,
    squared_error,
)
from .dl import dl_gibbs_step, sample_phi_posterior, sample_psi_posterior, sample_tau_posterior
from .global_local import bl_gibbs_step, hs_gibbs_step
from .point_mass import (
    PmPosterior,
    elementary_symmetric,
    log_elementary_symmetric,
    log_slab_marginal,
    pm_posterior,
)
from .state import ChainState, NumericalDegeneracyError

__all__ = [
    "ChainState",
    "FitSummary",
    "McmcConfig",
    "NumericalDegeneracyError",
    "PmPosterior",
    "bl_gibbs_step",
    "dl_gibbs_step",
    "elementary_symmetric",
    "hs_gibbs_step",
    "lasso_soft_threshold",
    "log_elementary_symmetric",
    "log_slab_marginal",
    "method_label",
    "pm_exact_posterior",
    "pm_posterior",
    "run_chain",
    "sample_phi_posterior",
    "sample_psi_posterior",
    "sample_tau_posterior",
    "squared_error",
]
