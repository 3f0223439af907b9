"""Treatment-effect estimates from a trained model."""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from tvae.model import TvaeModel
from utils.constants import T_SOURCES
from utils.errors import ContractError

logger = logging.getLogger(__name__)


@dataclass
class EffectEstimates:
    """Per-unit expected outcomes under do(t=1) and do(t=0), on the original outcome scale."""
    q1: np.ndarray
    q0: np.ndarray
    tau_hat: np.ndarray
    ate_hat: float
    y_hat: Optional[np.ndarray] = None

    @classmethod
    def from_potential_outcomes(cls, q1, q0, y_hat=None) -> "EffectEstimates":
        tau_hat = q1 - q0
        return cls(q1=q1, q0=q0, tau_hat=tau_hat, ate_hat=float(np.mean(tau_hat)), y_hat=y_hat)


def estimate_effects(model: TvaeModel, x, t_source: str = "observed", t=None,
                     n_samples: Optional[int] = None, seed: Optional[int] = None) -> EffectEstimates:
    """Monte Carlo average of the generative outcome heads over posterior draws.

    Every unit sees the same sequence of standard-normal draws, so a unit's estimate
    depends only on its own covariates.

    Args:
        model: Trained model
        x: Raw covariates [n x m] (the model's stored standardization is applied)
        t_source: "observed" routes the factual prediction ``y_hat`` by ``t``; "sampled"
            routes it by treatments drawn from the generative propensity
        t: Observed treatments, required when ``t_source`` is "observed"
        n_samples: Posterior draws per unit (defaults to ``config.n_effect_samples``)
        seed: Seed of the draws (defaults to ``config.seed``)

    Returns:
        EffectEstimates with q1, q0, tau_hat, ate_hat and y_hat

    Raises:
        ContractError: Untrained model, unknown ``t_source``, or missing ``t``
    """
    if not model.trained:
        raise ContractError("effects can only be estimated from a trained model")
    if t_source not in T_SOURCES:
        raise ContractError(f"unknown t_source '{t_source}'")
    if t_source == "observed" and t is None:
        raise ContractError("t_source='observed' needs the observed treatments")

    n_samples = n_samples or model.config.n_effect_samples
    rng = np.random.default_rng([model.config.seed if seed is None else seed, 3])
    x = model.check_covariates(model.standardize_covariates(x))
    posteriors = model.encode(x)
    n = x.shape[0]

    q1_sum, q0_sum, g_sum = np.zeros(n), np.zeros(n), np.zeros(n)
    for _ in range(n_samples):
        noise = {f: np.broadcast_to(rng.standard_normal(q.mu.shape[1]), q.mu.shape).copy()
                 for f, q in posteriors.items()}
        latents = model.sample_latents(posteriors, noise)
        head1, head0 = model.outcome_heads(latents)
        q1_sum += model.outcome_mean(head1).value[:, 0]
        q0_sum += model.outcome_mean(head0).value[:, 0]
        g_sum += model.propensity(latents).value[:, 0]

    q1 = model.unstandardize_outcome(q1_sum / n_samples)
    q0 = model.unstandardize_outcome(q0_sum / n_samples)
    if t_source == "observed":
        routing = np.asarray(t, dtype=np.float64)
    else:
        routing = (rng.random(n) < g_sum / n_samples).astype(np.float64)
    y_hat = np.where(routing == 1, q1, q0)
    estimates = EffectEstimates.from_potential_outcomes(q1, q0, y_hat)
    logger.debug(f"Estimated effects for {n} units with {n_samples} draws: ate={estimates.ate_hat:.4f}")
    return estimates
