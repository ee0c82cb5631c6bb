"""Rasch (1PL) IRT fitting for artificial-crowd response patterns.

Two estimators (marginal maximum likelihood EM and mean-field variational
inference), a generative crowd simulator, difficulty-based training-set
filters and the comparison metrics used to evaluate them.
"""

__version__ = "0.1.0"

from .rpdata import LabeledOutputs, ResponseMatrix, grade, load_matrix, prune, save_matrix
from .irt import grad_log_likelihood, log_likelihood, p_correct
from .quadrature import QuadratureRule, expect, gauss_hermite
from .mml import MmlConfig, MmlFit, fit_mml, score_map
from .vi import PriorSpec, VariationalState, ViConfig, ViFit, elbo_estimate, fit_vi, kl_gaussian
from .crowd import CompetenceProfile, CrowdSpec, competence_to_theta, simulate, split_half
from .filtering import FilterReport, FilterStrategy, apply_filter, percent_correct, sweep_to_fraction
from .analysis import AlignedPair, density_summary, rank_disagreement, rmsd, spearman

__all__ = [
    "AlignedPair",
    "CompetenceProfile",
    "CrowdSpec",
    "FilterReport",
    "FilterStrategy",
    "LabeledOutputs",
    "MmlConfig",
    "MmlFit",
    "PriorSpec",
    "QuadratureRule",
    "ResponseMatrix",
    "VariationalState",
    "ViConfig",
    "ViFit",
    "apply_filter",
    "competence_to_theta",
    "density_summary",
    "elbo_estimate",
    "expect",
    "fit_mml",
    "fit_vi",
    "gauss_hermite",
    "grad_log_likelihood",
    "grade",
    "kl_gaussian",
    "load_matrix",
    "log_likelihood",
    "p_correct",
    "percent_correct",
    "prune",
    "rank_disagreement",
    "rmsd",
    "save_matrix",
    "score_map",
    "simulate",
    "spearman",
    "split_half",
    "sweep_to_fraction",
]
