"""Synthetic stand-ins shaped like the IHDP and Jobs benchmarks.

The raw benchmark files are not bundled. These generators reproduce their shapes
(column counts, binary/continuous mix, treated fractions, the Jobs RCT subset) so the
pipelines and CSV contract can be exercised end to end without external downloads.
"""
import logging

import numpy as np
from scipy.special import expit

from data.models import CausalDataset

logger = logging.getLogger(__name__)

IHDP_UNITS = 747
IHDP_CONTINUOUS = 6
IHDP_BINARY = 19
IHDP_TREATED = 139

JOBS_RCT_TREATED = 260
JOBS_RCT_CONTROL = 185
JOBS_COMPARISON = 2490
JOBS_CONTINUOUS = 7
JOBS_BINARY = 10


def ihdp_like(seed: int, n: int = IHDP_UNITS) -> CausalDataset:
    """747 x 25 covariates (19 binary), unbounded outcome with noiseless mu0/mu1.

    Treatment is assigned to a fixed treated count through a covariate-dependent score.
    The response surface is exponential under control and linear under treatment,
    with an offset giving an effect on the treated of 4.
    """
    rng = np.random.default_rng(seed)
    continuous = rng.standard_normal((n, IHDP_CONTINUOUS))
    p_binary = rng.uniform(0.2, 0.8, IHDP_BINARY)
    binary = rng.binomial(1, p_binary, (n, IHDP_BINARY)).astype(np.float64)
    x = np.hstack([continuous, binary])

    score = x @ rng.normal(0.0, 0.4, x.shape[1]) + 0.3 * rng.standard_normal(n)
    n_treated = max(1, min(n - 1, round(n * IHDP_TREATED / IHDP_UNITS)))
    t = np.zeros(n)
    t[np.argsort(-score)[:n_treated]] = 1.0

    beta = rng.choice([0.0, 0.1, 0.2, 0.3, 0.4], size=x.shape[1], p=[0.6, 0.1, 0.1, 0.1, 0.1])
    mu0 = np.exp((x + 0.5) @ beta / 2.0)
    mu1 = x @ beta
    offset = np.mean(mu1[t == 1] - mu0[t == 1]) - 4.0
    mu1 = mu1 - offset
    y = np.where(t == 1, mu1, mu0) + rng.standard_normal(n)

    kinds = ("continuous",) * IHDP_CONTINUOUS + ("binary",) * IHDP_BINARY
    logger.info(f"Generated IHDP-shaped fixture: n={n}, treated={int(t.sum())}")
    return CausalDataset(x=x, t=t, y=y, covariate_kinds=kinds, mu0=mu0, mu1=mu1,
                         outcome_kind="unbounded_continuous", name="ihdp_like")


def jobs_like(seed: int) -> CausalDataset:
    """445 randomized units (260 treated, 185 control) plus 2490 untreated comparison units.

    The outcome is binary and only the randomized subset carries ``rct_flag``. Comparison
    units are drawn from a shifted covariate distribution, which confounds the pooled data.
    """
    rng = np.random.default_rng(seed)
    n_rct = JOBS_RCT_TREATED + JOBS_RCT_CONTROL
    n = n_rct + JOBS_COMPARISON
    shift = np.r_[np.zeros(n_rct), np.ones(JOBS_COMPARISON)]

    continuous = rng.standard_normal((n, JOBS_CONTINUOUS)) + 0.8 * shift[:, None]
    p_binary = expit(rng.normal(0.0, 0.8, JOBS_BINARY)[None, :] + 0.6 * shift[:, None])
    binary = rng.binomial(1, p_binary).astype(np.float64)
    x = np.hstack([continuous, binary])

    t = np.zeros(n)
    t[rng.permutation(n_rct)[:JOBS_RCT_TREATED]] = 1.0

    beta = rng.normal(0.0, 0.3, x.shape[1])
    effect = 0.4 - 0.3 * x[:, 0]
    base_logit = x @ beta - 0.5
    mu0 = expit(base_logit)
    mu1 = expit(base_logit + effect)
    y = rng.binomial(1, np.where(t == 1, mu1, mu0)).astype(np.float64)

    kinds = ("continuous",) * JOBS_CONTINUOUS + ("binary",) * JOBS_BINARY
    logger.info(f"Generated Jobs-shaped fixture: rct={n_rct}, comparison={JOBS_COMPARISON}")
    return CausalDataset(x=x, t=t, y=y, covariate_kinds=kinds, rct_flag=shift == 0,
                         outcome_kind="binary", name="jobs_like")
