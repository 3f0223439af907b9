"""Targeted maximum likelihood estimation of the average treatment effect."""
from .estimator import (
    TmleEstimate,
    clamp_propensity,
    clever_covariate,
    efficient_influence_curve,
    fluctuate,
    run_tmle,
    update_and_estimate,
)
from .learners import BaseLearner, fit_initial, outcome_features, predict_potential_outcomes
