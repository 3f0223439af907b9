"""Bernoulli likelihoods evaluated in logit space."""
from dataclasses import dataclass

import numpy as np

from diffcore import TapeNode, clip, constant, logit, mul, reduce_sum, sigmoid, sigmoid_cross_entropy
from utils.constants import LOGIT_BOUND, PROB_CLAMP
from utils.errors import ContractError, DimensionError


def _sum_features(node: TapeNode) -> TapeNode:
    return reduce_sum(node, axis=-1) if node.value.ndim > 1 else node


@dataclass
class BernoulliDist:
    """Bernoulli with success probability p in (0, 1) (held as bounded logits)."""
    logits: TapeNode

    def __post_init__(self):
        self.logits = clip(constant(self.logits), -LOGIT_BOUND, LOGIT_BOUND)

    @classmethod
    def from_probs(cls, p) -> "BernoulliDist":
        return cls(logit(clip(constant(p), PROB_CLAMP, 1.0 - PROB_CLAMP)))

    @property
    def p(self) -> TapeNode:
        return sigmoid(self.logits)

    def log_prob(self, x) -> TapeNode:
        return bernoulli_log_prob_logits(x, self.logits)


def bernoulli_log_prob_logits(x, logits, allow_fractional: bool = False) -> TapeNode:
    """x·ln σ(l) + (1−x)·ln(1−σ(l)) via the stable cross-entropy kernel.

    Logits are bounded to ±LOGIT_BOUND, which is the probability clamp in logit space.

    Args:
        x: Observations in {0, 1} (or [0, 1] when ``allow_fractional``)
        logits: Unconstrained logits, same shape as ``x``
        allow_fractional: Accept bounded continuous targets

    Returns:
        Log-likelihood summed over the feature axis
    """
    x, logits = constant(x), constant(logits)
    if x.shape != logits.shape:
        raise DimensionError(f"observations {x.shape} and logits {logits.shape} differ in shape")
    xv = x.value
    if allow_fractional:
        if np.any(~((xv >= 0) & (xv <= 1))):
            raise ContractError("bounded outcomes must lie in [0, 1]")
    elif np.any((xv != 0) & (xv != 1)):
        raise ContractError("Bernoulli observations must be 0 or 1")
    bounded = clip(logits, -LOGIT_BOUND, LOGIT_BOUND)
    return _sum_features(mul(sigmoid_cross_entropy(bounded, x), -1.0))


def bernoulli_log_prob(x, p) -> TapeNode:
    """Bernoulli log-likelihood of binary ``x`` under probabilities ``p``.

    ``p`` is clamped to [PROB_CLAMP, 1 - PROB_CLAMP] and converted to logits first.

    Raises:
        ContractError: ``x`` is not binary
    """
    return BernoulliDist.from_probs(p).log_prob(x)
