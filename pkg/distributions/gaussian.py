"""Diagonal Gaussians: KL to the standard normal prior, log-density, pathwise sampling."""
import math
from dataclasses import dataclass

import numpy as np

from diffcore import TapeNode, add, clip, constant, exp, log, mul, reduce_sum, square, sub
from utils.constants import VARIANCE_FLOOR
from utils.errors import DimensionError, DomainError

LOG_2PI = math.log(2.0 * math.pi)


def _sum_features(node: TapeNode) -> TapeNode:
    return reduce_sum(node, axis=-1) if node.value.ndim > 1 else node


def _require_positive(sigma2: TapeNode, where: str):
    if np.any(~(sigma2.value > 0)):
        raise DomainError(f"{where}: variance must be strictly positive")


@dataclass
class DiagGaussian:
    """Factorized Gaussian with per-entry mean and variance, both [batch x D]."""
    mu: TapeNode
    sigma2: TapeNode

    def __post_init__(self):
        self.mu = constant(self.mu)
        self.sigma2 = constant(self.sigma2)
        if self.mu.shape != self.sigma2.shape:
            raise DimensionError(f"mean {self.mu.shape} and variance {self.sigma2.shape} differ in shape")

    @classmethod
    def from_log_variance(cls, mu, log_sigma2) -> "DiagGaussian":
        """Build from an unconstrained log-variance head; variance is floored at VARIANCE_FLOOR."""
        return cls(mu, add(exp(log_sigma2), VARIANCE_FLOOR))

    @property
    def dim(self) -> int:
        return self.mu.shape[-1]


def kl_to_standard_normal(q: DiagGaussian) -> TapeNode:
    """Per-sample KL(q || N(0, I)) = Σ_d ½(σ² + μ² − 1 − ln σ²).

    Raises:
        DomainError: Some variance is not strictly positive
    """
    _require_positive(q.sigma2, "kl_to_standard_normal")
    terms = sub(add(q.sigma2, square(q.mu)), add(log(q.sigma2), 1.0))
    return mul(_sum_features(terms), 0.5)


def reparam_sample(q: DiagGaussian, noise) -> TapeNode:
    """Pathwise sample z = μ + √σ² · noise, differentiable in μ and σ².

    The variance is floored at VARIANCE_FLOOR before the square root.
    """
    noise = constant(noise)
    if noise.shape != q.mu.shape:
        raise DimensionError(f"noise {noise.shape} does not match mean {q.mu.shape}")
    if np.any(q.sigma2.value < 0) or np.any(np.isnan(q.sigma2.value)):
        raise DomainError("reparam_sample: negative variance")
    std = exp(mul(log(clip(q.sigma2, VARIANCE_FLOOR, np.inf)), 0.5))
    return add(q.mu, mul(std, noise))


def gaussian_log_prob_logvar(x, mu, log_sigma2) -> TapeNode:
    """Gaussian log-density parameterized by log-variance, summed over the feature axis."""
    x, mu, log_sigma2 = constant(x), constant(mu), constant(log_sigma2)
    if x.shape != mu.shape:
        raise DimensionError(f"observations {x.shape} and mean {mu.shape} differ in shape")
    mahalanobis = mul(square(sub(x, mu)), exp(mul(log_sigma2, -1.0)))
    entry = mul(add(add(log_sigma2, LOG_2PI), mahalanobis), -0.5)
    return _sum_features(entry)


def gaussian_log_prob(x, mu, sigma2) -> TapeNode:
    """Entrywise −½(ln 2πσ² + (x−μ)²/σ²), summed over the feature axis.

    Raises:
        DomainError: Some variance is not strictly positive
        DimensionError: Shapes disagree
    """
    sigma2 = constant(sigma2)
    _require_positive(sigma2, "gaussian_log_prob")
    return gaussian_log_prob_logvar(x, mu, log(sigma2))
