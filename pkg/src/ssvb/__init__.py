"""Spike-and-slab variable selection by coordinate-ascent variational Bayes."""

__version__ = "0.1.0"

from .collapsed_vb import fit_collapsed
from .core_math import (
    Dataset,
    DomainError,
    NumericalDomainError,
    PreconditionError,
    SingularityError,
    SpikeSlabHyper,
    expit,
    logit,
    spd_solve,
    validate_dataset,
)
from .experiments import ExperimentConfig, TruthSpec, check_v0_admissible, consistency_experiment, simulate
from .linear_vb import FitOptions, FitReport, fit_linear, sparsity_diagnostics, tau_bounds
from .logistic_vb import fit_logistic, pg_mean
from .oracle import ExactPosterior, QuadratureOptions, enumerate_posterior
from .quantile_vb import fit_quantile, gig_moments

__all__ = [
    "Dataset", "DomainError", "ExactPosterior", "ExperimentConfig", "FitOptions", "FitReport",
    "NumericalDomainError", "PreconditionError", "QuadratureOptions", "SingularityError",
    "SpikeSlabHyper", "TruthSpec", "check_v0_admissible", "consistency_experiment",
    "enumerate_posterior", "expit", "fit_collapsed", "fit_linear", "fit_logistic", "fit_quantile",
    "gig_moments", "logit", "pg_mean", "simulate", "sparsity_diagnostics", "spd_solve",
    "tau_bounds", "validate_dataset",
]
