"""Rescaled spike and slab variable selection for linear regression."""

from .bench import Metrics, SimulationSpec, TrueModel, evaluate, gen_breiman, run_experiment
from .errors import InputError, NumericalError, SpikeSlabError
from .gibbs import GibbsConfig, GibbsState, PosteriorSummary, gibbs_sweep, run_chain
from .model import (
    HypervarianceDensity,
    PriorConfig,
    conditional_posterior_mean,
    fixed_gamma_limit,
    hypervariance_cdf,
    hypervariance_density,
    rescale_response,
)
from .regression import RawDataset, StandardizedDesign, fit_ols, quadratic_expand, read_csv, standardize
from .selection import AlphaSchedule, apply_rule, ols_forward, ols_hard, svs_forward, zcut

__version__ = "0.1.0"

__all__ = [
    "AlphaSchedule",
    "GibbsConfig",
    "GibbsState",
    "HypervarianceDensity",
    "InputError",
    "Metrics",
    "NumericalError",
    "PosteriorSummary",
    "PriorConfig",
    "RawDataset",
    "SimulationSpec",
    "SpikeSlabError",
    "StandardizedDesign",
    "TrueModel",
    "apply_rule",
    "conditional_posterior_mean",
    "evaluate",
    "fit_ols",
    "fixed_gamma_limit",
    "gen_breiman",
    "gibbs_sweep",
    "hypervariance_cdf",
    "hypervariance_density",
    "ols_forward",
    "ols_hard",
    "quadratic_expand",
    "read_csv",
    "rescale_response",
    "run_chain",
    "run_experiment",
    "standardize",
    "svs_forward",
    "zcut",
]
