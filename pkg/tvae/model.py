"""Structured encoder/decoder networks of the targeted VAE.

Inference networks read the covariates only:

    f1/f2   q(z_t | x) mean and log-variance       f9    ĝ_q(t | x)
    f3/f4   q(z_y | x)                             f10   Q̂_q(y | t=1, x)
    f5/f6   q(z_c | x)                             f11   Q̂_q(y | t=0, x)
    f7/f8   q(z_o | x)

Generative networks:

    h1      ĝ_p(t | z_t, z_c)
    h2/h3   Q̂_p(y | t=1, z_y, z_c) and Q̂_p(y | t=0, z_y, z_c)
    h4/h5   mean and log-variance of continuous x given all factors
    h6      logits of binary x given all factors

Outcome heads emit a Gaussian mean (unit variance) for unbounded outcomes and a logit
otherwise. ``d_zo = 0`` removes f7/f8 and z_o entirely.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from diffcore import MLP, TapeNode, add, concat, constant, mul, parameter, sigmoid, sub
from distributions import DiagGaussian, reparam_sample
from data.models import Standardization
from tvae.config import TvaeConfig
from utils.errors import DimensionError, InputError

logger = logging.getLogger(__name__)

FACTORS = ("z_t", "z_y", "z_c", "z_o")
EPSILON_NAME = "epsilon"


@dataclass
class LatentSample:
    """One draw of each latent factor, [batch x D] per factor."""
    z_t: TapeNode
    z_y: TapeNode
    z_c: TapeNode
    z_o: Optional[TapeNode] = None

    def factors(self, *names: str) -> TapeNode:
        """Factors ``names`` side by side (an absent z_o is skipped)."""
        parts = [getattr(self, name) for name in names if getattr(self, name) is not None]
        return parts[0] if len(parts) == 1 else concat(parts, axis=1)


def route(t, head1: TapeNode, head0: TapeNode) -> TapeNode:
    """t * head1 + (1 - t) * head0, with t a [batch x 1] treatment column."""
    t = constant(t)
    return add(mul(t, head1), mul(sub(1.0, t), head0))


class TvaeModel:
    """All network parameters, the fluctuation scalar ε and the covariate schema."""

    def __init__(self, config: TvaeConfig, covariate_kinds: Sequence[str]):
        """Build freshly initialized networks.

        Args:
            config: Model hyperparameters (``config.seed`` drives initialization)
            covariate_kinds: "binary" or "continuous" for each covariate column
        """
        self.config = config
        self.covariate_kinds = tuple(covariate_kinds)
        self.binary_columns = [j for j, k in enumerate(self.covariate_kinds) if k == "binary"]
        self.continuous_columns = [j for j, k in enumerate(self.covariate_kinds) if k == "continuous"]
        self.trained = False
        self.covariate_transform: Optional[Standardization] = None
        self.outcome_transform: Optional[Standardization] = None

        rng = np.random.default_rng(config.seed)
        m = len(self.covariate_kinds)
        width, depth = config.hidden_neurons, config.hidden_layers

        def net(fan_in: int, fan_out: int, name: str) -> MLP:
            return MLP(fan_in, width, depth, fan_out, rng, name)

        self.dims = {"z_t": config.d_zt, "z_y": config.d_zy, "z_c": config.d_zc, "z_o": config.d_zo}
        self.encoders: Dict[str, Tuple[MLP, MLP]] = {}
        for i, factor in enumerate(FACTORS):
            if self.dims[factor] > 0:
                self.encoders[factor] = (net(m, self.dims[factor], f"f{2 * i + 1}"),
                                         net(m, self.dims[factor], f"f{2 * i + 2}"))
        self.f9 = net(m, 1, "f9")
        self.f10 = net(m, 1, "f10")
        self.f11 = net(m, 1, "f11")

        total = sum(self.dims.values())
        self.h1 = net(config.d_zt + config.d_zc, 1, "h1")
        self.h2 = net(config.d_zy + config.d_zc, 1, "h2")
        self.h3 = net(config.d_zy + config.d_zc, 1, "h3")
        self.h4 = net(total, len(self.continuous_columns), "h4") if self.continuous_columns else None
        self.h5 = net(total, len(self.continuous_columns), "h5") if self.continuous_columns else None
        self.h6 = net(total, len(self.binary_columns), "h6") if self.binary_columns else None
        self.epsilon = parameter(np.zeros(()), name=EPSILON_NAME)

    @property
    def n_covariates(self) -> int:
        return len(self.covariate_kinds)

    @property
    def outcome_kind(self) -> str:
        return self.config.outcome_kind

    def networks(self) -> Dict[str, MLP]:
        nets = {mlp.name: mlp for pair in self.encoders.values() for mlp in pair}
        nets.update({mlp.name: mlp for mlp in (self.f9, self.f10, self.f11, self.h1, self.h2,
                                               self.h3, self.h4, self.h5, self.h6) if mlp is not None})
        return nets

    def parameters(self) -> Dict[str, TapeNode]:
        """Every trainable node by name, ε included."""
        params: Dict[str, TapeNode] = {}
        for mlp in self.networks().values():
            params.update(mlp.parameters())
        params[EPSILON_NAME] = self.epsilon
        return params

    def network_parameters(self, *names: str) -> Dict[str, TapeNode]:
        """Parameters of the named networks (e.g. ``"h1", "f9"``)."""
        nets = self.networks()
        params: Dict[str, TapeNode] = {}
        for name in names:
            params.update(nets[name].parameters())
        return params

    def check_covariates(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_covariates:
            raise DimensionError(f"model expects [n x {self.n_covariates}] covariates, got {x.shape}")
        if np.isnan(x).any():
            raise InputError("covariates contain NaN")
        return x

    def encode(self, x) -> Dict[str, DiagGaussian]:
        """Diagonal-Gaussian posteriors q(z_t|x), q(z_y|x), q(z_c|x) and q(z_o|x).

        ``x`` must already carry the model's covariate standardization.
        """
        x = constant(self.check_covariates(x))
        return {factor: DiagGaussian.from_log_variance(mu_net(x), logvar_net(x))
                for factor, (mu_net, logvar_net) in self.encoders.items()}

    def sample_latents(self, posteriors: Dict[str, DiagGaussian], noise: Dict[str, np.ndarray]) -> LatentSample:
        """Pathwise draw of every factor from its posterior."""
        draws = {factor: reparam_sample(q, noise[factor]) for factor, q in posteriors.items()}
        return LatentSample(**draws)

    def draw_noise(self, posteriors: Dict[str, DiagGaussian], rng: np.random.Generator) -> Dict[str, np.ndarray]:
        return {factor: rng.standard_normal(q.mu.shape) for factor, q in posteriors.items()}

    def propensity_logits(self, latents: LatentSample) -> TapeNode:
        """Generative propensity ĝ_p on (z_t, z_c), as a logit column."""
        return self.h1(latents.factors("z_t", "z_c"))

    def propensity(self, latents: LatentSample) -> TapeNode:
        return sigmoid(self.propensity_logits(latents))

    def outcome_heads(self, latents: LatentSample) -> Tuple[TapeNode, TapeNode]:
        """Generative outcome heads (t=1, t=0) on (z_y, z_c)."""
        features = latents.factors("z_y", "z_c")
        return self.h2(features), self.h3(features)

    def outcome_mean(self, head: TapeNode) -> TapeNode:
        """Expected outcome from a head output."""
        return head if self.outcome_kind == "unbounded_continuous" else sigmoid(head)

    def inference_propensity_logits(self, x) -> TapeNode:
        return self.f9(constant(x))

    def inference_outcome_heads(self, x) -> Tuple[TapeNode, TapeNode]:
        x = constant(x)
        return self.f10(x), self.f11(x)

    def decode_covariates(self, latents: LatentSample):
        """Continuous mean and log-variance, and binary logits, given all factors."""
        features = latents.factors(*FACTORS)
        mean = self.h4(features) if self.h4 is not None else None
        logvar = self.h5(features) if self.h5 is not None else None
        logits = self.h6(features) if self.h6 is not None else None
        return mean, logvar, logits

    def snapshot(self) -> Dict[str, np.ndarray]:
        """Copies of every parameter value."""
        return {name: node.value.copy() for name, node in self.parameters().items()}

    def restore(self, values: Dict[str, np.ndarray]):
        params = self.parameters()
        missing = sorted(set(params) - set(values))
        if missing:
            raise DimensionError(f"snapshot lacks parameters: {', '.join(missing)}")
        for name, node in params.items():
            value = np.asarray(values[name], dtype=np.float64)
            if value.shape != node.shape:
                raise DimensionError(f"'{name}' has shape {node.shape}, snapshot holds {value.shape}")
            node.value = value.copy()

    def standardize_covariates(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return x if self.covariate_transform is None else self.covariate_transform.transform_values(x)

    def standardize_outcome(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        return y if self.outcome_transform is None else self.outcome_transform.transform_values(y)

    def unstandardize_outcome(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        return y if self.outcome_transform is None else self.outcome_transform.invert_values(y)
