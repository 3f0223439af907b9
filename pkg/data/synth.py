"""Synthetic structural causal models with known potential-outcome means."""
import logging

import numpy as np
from scipy.special import expit

from data.models import CausalDataset
from utils.errors import ConfigError

logger = logging.getLogger(__name__)

# Columns x0..x7 hold x1..x8 of the generating equations; x0 and x3 are binary
TVAESYNTH_KINDS = ("binary", "continuous", "continuous", "binary",
                   "continuous", "continuous", "continuous", "continuous")


def _require_units(n: int):
    if n < 1:
        raise ConfigError(f"need at least one unit, got n={n}")


def generate_tvaesynth(n: int, seed: int) -> CausalDataset:
    """Sample the instrumental/risk/confounding/miscellaneous SCM.

    Each latent factor is a scalar standard normal. Binary covariates and the treatment
    take Bernoulli(0.5) exogenous noise, every other node standard normal noise. The
    second argument of each Gaussian node is its standard deviation.

    Args:
        n: Number of units
        seed: Seed of the single random stream

    Returns:
        CausalDataset with mu0, mu1 and the generating latents attached
    """
    _require_units(n)
    rng = np.random.default_rng(seed)
    z_o, z_c, z_t, z_y, u_y = (rng.standard_normal(n) for _ in range(5))
    u_x1, u_x4, u_t = (rng.binomial(1, 0.5, n).astype(np.float64) for _ in range(3))
    u_cont = rng.standard_normal((6, n))

    def gaussian(mean, sd):
        return mean + sd * rng.standard_normal(n)

    x = np.column_stack([
        rng.binomial(1, expit(z_t + 0.1 * (u_x1 - 0.5))),
        gaussian(0.4 * z_o + 0.3 * z_c + 0.5 * z_y + 0.1 * u_cont[0], 0.2),
        gaussian(0.2 * z_o + 0.2 * z_c + 1.2 * z_t + 0.1 * u_cont[1], 0.2),
        rng.binomial(1, expit(0.6 * z_o + 0.1 * (u_x4 - 0.5))),
        gaussian(0.6 * z_t + 0.1 * u_cont[2], 0.1),
        gaussian(0.9 * z_y + 0.1 * u_cont[3], 0.1),
        gaussian(0.5 * z_o + 0.1 * u_cont[4], 0.1),
        gaussian(0.5 * z_o + 0.1 * u_cont[5], 0.1),
    ]).astype(np.float64)

    t_p = expit(0.2 * z_c + 0.8 * z_t + 0.1 * u_t)
    t = rng.binomial(1, t_p).astype(np.float64)
    y = tvaesynth_outcome(z_c, z_y, t, u_y)
    mu0 = 0.2 * z_c
    mu1 = 0.2 * z_c + 0.5 * z_y + 0.2

    logger.info(f"Generated TVAESynth: n={n}, seed={seed}, treated={t.mean():.3f}")
    return CausalDataset(
        x=x, t=t, y=y, covariate_kinds=TVAESYNTH_KINDS, mu0=mu0, mu1=mu1,
        latents={"z_o": z_o, "z_c": z_c, "z_t": z_t, "z_y": z_y},
        outcome_kind="unbounded_continuous", name="tvaesynth",
    )


def tvaesynth_outcome(z_c, z_y, t, u_y):
    """y := 0.2 z_c + 0.5 z_y t + 0.2 t + 0.1 U_y"""
    return 0.2 * z_c + 0.5 * z_y * t + 0.2 * t + 0.1 * u_y


def generate_linear_scm(n: int, seed: int) -> CausalDataset:
    """One confounder, logistic treatment, additive unit effect.

    x ~ N(0, 1), t ~ Bern(σ(0.6x)), y = t + 0.5x + N(0, 0.1) (standard deviation 0.1),
    so the true ATE is exactly 1.
    """
    _require_units(n)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    t = rng.binomial(1, expit(0.6 * x)).astype(np.float64)
    y = t + 0.5 * x + 0.1 * rng.standard_normal(n)
    return CausalDataset(
        x=x[:, None], t=t, y=y, covariate_kinds=("continuous",),
        mu0=0.5 * x, mu1=1.0 + 0.5 * x, outcome_kind="unbounded_continuous", name="linear",
    )
