"""Diagonal-Gaussian and Bernoulli primitives."""
from .bernoulli import BernoulliDist, bernoulli_log_prob, bernoulli_log_prob_logits
from .gaussian import (
    LOG_2PI,
    DiagGaussian,
    gaussian_log_prob,
    gaussian_log_prob_logvar,
    kl_to_standard_normal,
    reparam_sample,
)
