"""Training objective: negative ELBO plus the targeted regularizer ξ."""
import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from diffcore import (
    TapeNode, add, clip, constant, exp, log, mul, neg, reduce_mean, sigmoid, sigmoid_cross_entropy,
    square, stop_gradient, straight_through_bernoulli, sub,
)
from distributions import bernoulli_log_prob_logits, gaussian_log_prob_logvar, kl_to_standard_normal
from tvae.model import LatentSample, TvaeModel, route
from utils.constants import PROPENSITY_CLAMP

logger = logging.getLogger(__name__)


@dataclass
class Batch:
    """Covariates [n x m], treatment column [n x 1] and outcome column [n x 1]."""
    x: np.ndarray
    t: np.ndarray
    y: np.ndarray

    @classmethod
    def from_arrays(cls, x, t, y) -> "Batch":
        return cls(np.asarray(x, dtype=np.float64),
                   np.asarray(t, dtype=np.float64).reshape(-1, 1),
                   np.asarray(y, dtype=np.float64).reshape(-1, 1))

    @property
    def size(self) -> int:
        return self.x.shape[0]


def outcome_log_likelihood(model: TvaeModel, y, head: TapeNode) -> TapeNode:
    """Per-unit log p(y | head) for the model's outcome family."""
    if model.outcome_kind == "unbounded_continuous":
        return gaussian_log_prob_logvar(y, head, np.zeros(head.shape))
    return bernoulli_log_prob_logits(y, head, allow_fractional=model.outcome_kind == "bounded_continuous")


def elbo_terms(model: TvaeModel, batch: Batch, latents: LatentSample, posteriors,
               rng: np.random.Generator) -> Dict[str, TapeNode]:
    """Batch-averaged components of the objective, each a scalar node.

    Reconstruction and likelihood terms are log-likelihoods (to be maximized); ``kl`` is
    the summed KL of the four posteriors from the standard-normal prior.
    """
    terms: Dict[str, TapeNode] = {}
    mean, logvar, logits = model.decode_covariates(latents)
    x_ll = None
    if mean is not None:
        x_ll = gaussian_log_prob_logvar(batch.x[:, model.continuous_columns], mean, logvar)
    if logits is not None:
        binary_ll = bernoulli_log_prob_logits(batch.x[:, model.binary_columns], logits)
        x_ll = binary_ll if x_ll is None else add(x_ll, binary_ll)
    terms["x"] = reduce_mean(x_ll)

    g_logits = model.propensity_logits(latents)
    terms["t"] = reduce_mean(bernoulli_log_prob_logits(batch.t, g_logits))

    # generative outcome head is routed by a treatment drawn from ĝ_p
    t_hat = straight_through_bernoulli(sigmoid(g_logits), rng)
    head1, head0 = model.outcome_heads(latents)
    terms["y"] = reduce_mean(outcome_log_likelihood(model, batch.y, route(t_hat, head1, head0)))

    terms["aux_t"] = reduce_mean(bernoulli_log_prob_logits(batch.t, model.inference_propensity_logits(batch.x)))
    aux1, aux0 = model.inference_outcome_heads(batch.x)
    terms["aux_y"] = reduce_mean(outcome_log_likelihood(model, batch.y, route(batch.t, aux1, aux0)))

    kl = None
    for q in posteriors.values():
        factor_kl = kl_to_standard_normal(q)
        kl = factor_kl if kl is None else add(kl, factor_kl)
    terms["kl"] = reduce_mean(kl)
    return terms


def combine_elbo(terms: Dict[str, TapeNode], beta: float) -> TapeNode:
    """-(log-likelihood terms) + β·KL."""
    likelihood = add(add(add(terms["x"], terms["t"]), add(terms["y"], terms["aux_t"])), terms["aux_y"])
    return add(neg(likelihood), mul(terms["kl"], beta))


def elbo_loss(model: TvaeModel, batch: Batch, rng: np.random.Generator,
              latents: Optional[LatentSample] = None, posteriors=None) -> TapeNode:
    """Negative ELBO of a batch with a single latent draw per unit.

    Args:
        model: The model
        batch: Standardized batch
        rng: Source of latent noise and of the sampled treatments
        latents: Reuse an existing draw (``posteriors`` must then be given too)
        posteriors: Posteriors the draw came from

    Returns:
        Scalar node, to be minimized
    """
    if latents is None:
        posteriors = model.encode(batch.x)
        latents = model.sample_latents(posteriors, model.draw_noise(posteriors, rng))
    return combine_elbo(elbo_terms(model, batch, latents, posteriors, rng), model.config.beta)


def clever_covariate_node(t, g: TapeNode) -> TapeNode:
    """t / g - (1 - t) / (1 - g) as a tape node."""
    t = constant(t)
    inv_g = exp(neg(log(g)))
    inv_not_g = exp(neg(log(sub(1.0, g))))
    return sub(mul(t, inv_g), mul(sub(1.0, t), inv_not_g))


def targeted_regularizer(model: TvaeModel, batch: Batch, rng: Optional[np.random.Generator] = None,
                         latents: Optional[LatentSample] = None) -> TapeNode:
    """Batch-averaged loss ξ of the fluctuated outcome head at the observed treatment.

    The generative propensity is clamped to [0.01, 0.99] and, unless the model config
    disables it, detached from the tape so ξ never reaches h1 or f9. Bounded and binary
    outcomes use the logistic fluctuation logit(Q) + εH with cross-entropy; unbounded
    outcomes use Q + εH with squared error.
    """
    if latents is None:
        posteriors = model.encode(batch.x)
        latents = model.sample_latents(posteriors, model.draw_noise(posteriors, rng or np.random.default_rng()))
    g = clip(model.propensity(latents), *PROPENSITY_CLAMP)
    if model.config.stop_propensity_gradient:
        g = stop_gradient(g)
    H = clever_covariate_node(batch.t, g)

    head1, head0 = model.outcome_heads(latents)
    fluctuated = add(route(batch.t, head1, head0), mul(model.epsilon, H))
    if model.outcome_kind == "unbounded_continuous":
        return reduce_mean(square(sub(constant(batch.y), fluctuated)))
    return reduce_mean(sigmoid_cross_entropy(fluctuated, batch.y))


def total_loss(model: TvaeModel, batch: Batch, rng: np.random.Generator) -> Dict[str, TapeNode]:
    """Objective of one training step and its attributable parts.

    Returns:
        Map with ``total``, ``elbo``, ``xi`` (absent when λ_TL = 0) and every ELBO term
    """
    posteriors = model.encode(batch.x)
    latents = model.sample_latents(posteriors, model.draw_noise(posteriors, rng))
    parts = elbo_terms(model, batch, latents, posteriors, rng)
    parts["elbo"] = combine_elbo(parts, model.config.beta)
    total = parts["elbo"]
    if model.config.lambda_tl > 0:
        parts["xi"] = targeted_regularizer(model, batch, latents=latents)
        total = add(total, mul(parts["xi"], model.config.lambda_tl))
    parts["total"] = total
    return parts
