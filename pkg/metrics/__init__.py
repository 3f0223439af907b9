"""Evaluation functionals and replication aggregation."""
from .effects import eate, eatt, evaluate_effects, pehe, policy_risk
from .report import MetricsReport, aggregate
