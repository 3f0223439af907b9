"""Targeting step, updated estimator and efficient influence curve."""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import optimize, special, stats

from tmle.learners import fit_initial, predict_potential_outcomes
from utils.constants import PROB_CLAMP, PROPENSITY_CLAMP
from utils.errors import ContractError, ConvergenceError, InputError

logger = logging.getLogger(__name__)

SCORE_TOL = 1e-10
LOGISTIC_KINDS = ("binary", "bounded_continuous")


@dataclass
class TmleEstimate:
    """Initial and targeted estimators with the resulting effect and its influence curve."""
    q0_init: np.ndarray
    q1_init: np.ndarray
    g1: np.ndarray
    H: np.ndarray
    epsilon_hat: float
    q0_star: np.ndarray
    q1_star: np.ndarray
    ate: float
    ic: np.ndarray
    se: float
    truncated: int = 0
    outcome_kind: str = "unbounded_continuous"

    @property
    def mean_ic(self) -> float:
        return float(np.mean(self.ic))

    def confidence_interval(self, alpha: float = 0.05) -> Tuple[float, float]:
        z = stats.norm.ppf(1 - alpha / 2)
        return self.ate - z * self.se, self.ate + z * self.se

    def summary(self) -> dict:
        lower, upper = self.confidence_interval()
        return {
            "ate": self.ate,
            "se": self.se,
            "ci_lower": lower,
            "ci_upper": upper,
            "epsilon_hat": self.epsilon_hat,
            "mean_ic": self.mean_ic,
            "truncated": self.truncated,
            "n": int(self.ic.size),
        }


def clamp_propensity(g1: np.ndarray, bounds: Tuple[float, float] = PROPENSITY_CLAMP) -> Tuple[np.ndarray, int]:
    """Truncate propensities to ``bounds``; also returns how many were moved."""
    g1 = np.asarray(g1, dtype=np.float64)
    clipped = np.clip(g1, *bounds)
    truncated = int(np.count_nonzero(clipped != g1))
    if truncated:
        logger.warning(f"Truncated {truncated} of {g1.size} propensity scores to {bounds}")
    return clipped, truncated


def clever_covariate(t, g1) -> np.ndarray:
    """H = 1/g1 for treated units and -1/(1 - g1) for controls.

    Raises:
        InputError: A propensity lies outside (0, 1)
    """
    t = np.asarray(t, dtype=np.float64)
    g1 = np.asarray(g1, dtype=np.float64)
    if np.any(~((g1 > 0) & (g1 < 1))):
        raise InputError("propensity scores must lie strictly inside (0, 1)")
    return np.where(t == 1, 1.0 / g1, -1.0 / (1.0 - g1))


def _link(q: np.ndarray, logistic: bool) -> np.ndarray:
    return special.logit(np.clip(q, PROB_CLAMP, 1.0 - PROB_CLAMP)) if logistic else q


def _inverse_link(eta: np.ndarray, logistic: bool) -> np.ndarray:
    return special.expit(eta) if logistic else eta


def fluctuate(q_init, H, y, outcome_kind: str) -> float:
    """Fit the one-parameter fluctuation of the initial estimator along H.

    Binary and bounded outcomes (scaled to [0, 1]) use the logistic offset regression
    logit(Q) + εH; unbounded outcomes use Q + εH with squared error. ε solves the mean
    score equation mean(H (y - Q_ε)) = 0 to within 1e-10.

    Args:
        q_init: Initial predictions at the observed treatment
        H: Clever covariate at the observed treatment
        y: Outcomes
        outcome_kind: Outcome family

    Returns:
        Fitted ε

    Raises:
        InputError: Non-finite clever covariate
        ContractError: Logistic fluctuation with outcomes outside [0, 1]
        ConvergenceError: The score equation could not be solved
    """
    q_init, H, y = (np.asarray(v, dtype=np.float64) for v in (q_init, H, y))
    if not np.all(np.isfinite(H)):
        raise InputError("clever covariate contains non-finite values")
    logistic = outcome_kind in LOGISTIC_KINDS
    if logistic and np.any((y < 0) | (y > 1)):
        raise ContractError("logistic fluctuation needs outcomes in [0, 1]")
    offset = _link(q_init, logistic)

    def score(eps):
        return -np.mean(H * (y - _inverse_link(offset + eps * H, logistic)))

    def score_slope(eps):
        if not logistic:
            return np.mean(H * H)
        p = special.expit(offset + eps * H)
        return np.mean(H * H * p * (1.0 - p))

    try:
        eps = optimize.newton(score, 0.0, fprime=score_slope, tol=1e-14, maxiter=100)
    except (RuntimeError, OverflowError):
        eps = np.nan
    if not np.isfinite(eps) or abs(score(eps)) >= SCORE_TOL:
        eps = _bracketed_root(score)
    if abs(score(eps)) >= SCORE_TOL:
        raise ConvergenceError(f"fluctuation score {score(eps):.3e} above {SCORE_TOL}")
    return float(eps)


def _bracketed_root(score, width: float = 1.0, max_width: float = 1e6) -> float:
    while width <= max_width:
        if score(-width) * score(width) < 0:
            return optimize.brentq(score, -width, width, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        width *= 4.0
    raise ConvergenceError("no sign change of the fluctuation score within the search bracket")


def efficient_influence_curve(y, t, q1, q0, g1, ate: float) -> np.ndarray:
    """Per-unit efficient influence curve of the ATE: H (y - Q_t) + q1 - q0 - ate."""
    y, t, q1, q0 = (np.asarray(v, dtype=np.float64) for v in (y, t, q1, q0))
    H = clever_covariate(t, g1)
    q_obs = np.where(t == 1, q1, q0)
    return H * (y - q_obs) + q1 - q0 - ate


def update_and_estimate(q0_init, q1_init, g1, epsilon_hat: float, y, t, outcome_kind: str,
                        y_range: Optional[Tuple[float, float]] = None, truncated: int = 0) -> TmleEstimate:
    """Apply the fitted fluctuation and compute the targeted ATE.

    Predictions and outcomes are on the fluctuation scale. With ``y_range`` = (lo, hi)
    they are min-max scaled, and every reported quantity is mapped back to the outcome
    scale.
    """
    q0_init, q1_init, y, t = (np.asarray(v, dtype=np.float64) for v in (q0_init, q1_init, y, t))
    g1 = np.asarray(g1, dtype=np.float64)
    logistic = outcome_kind in LOGISTIC_KINDS
    H1 = clever_covariate(np.ones_like(t), g1)
    H0 = clever_covariate(np.zeros_like(t), g1)
    q1_star = _inverse_link(_link(q1_init, logistic) + epsilon_hat * H1, logistic)
    q0_star = _inverse_link(_link(q0_init, logistic) + epsilon_hat * H0, logistic)

    if y_range is not None:
        lo, hi = y_range

        def unscale(v):
            return v * (hi - lo) + lo

        q0_init, q1_init, q0_star, q1_star, y = map(unscale, (q0_init, q1_init, q0_star, q1_star, y))

    ate = float(np.mean(q1_star - q0_star))
    ic = efficient_influence_curve(y, t, q1_star, q0_star, g1, ate)
    se = float(np.sqrt(np.var(ic, ddof=1) / ic.size)) if ic.size > 1 else float("nan")
    return TmleEstimate(
        q0_init=q0_init, q1_init=q1_init, g1=g1, H=np.where(t == 1, H1, H0), epsilon_hat=float(epsilon_hat),
        q0_star=q0_star, q1_star=q1_star, ate=ate, ic=ic, se=se, truncated=truncated, outcome_kind=outcome_kind,
    )


def run_tmle(data, learner_kind: str = "logistic_linear", propensity_learner_kind: Optional[str] = None,
             tol: float = 1e-6, max_iter: int = 5000, seed: int = 0) -> TmleEstimate:
    """Fit initial estimators, target them and report the ATE.

    Args:
        data: CausalDataset
        learner_kind: Outcome learner kind
        propensity_learner_kind: Propensity learner kind (defaults to ``learner_kind``)
        tol: Learner convergence tolerance
        max_iter: Learner iteration cap
        seed: Seed for MLP learners

    Returns:
        TmleEstimate on the outcome scale of ``data``
    """
    outcome, propensity = fit_initial(data, learner_kind, propensity_learner_kind, tol, max_iter, seed)
    g1, truncated = clamp_propensity(propensity.predict(data.x))
    potential = predict_potential_outcomes(outcome, data.x)
    q1, q0, y = potential[1], potential[0], data.y

    y_range = None
    fluctuation_kind = data.outcome_kind
    if data.outcome_kind == "bounded_continuous":
        lo, hi = float(y.min()), float(y.max())
        if hi > lo:
            y_range = (lo, hi)
            q1, q0, y = ((v - lo) / (hi - lo) for v in (q1, q0, y))
        else:
            fluctuation_kind = "unbounded_continuous"
    if fluctuation_kind in LOGISTIC_KINDS:
        q1, q0 = np.clip(q1, PROB_CLAMP, 1 - PROB_CLAMP), np.clip(q0, PROB_CLAMP, 1 - PROB_CLAMP)

    H = clever_covariate(data.t, g1)
    q_obs = np.where(data.t == 1, q1, q0)
    epsilon_hat = fluctuate(q_obs, H, y, fluctuation_kind)
    estimate = update_and_estimate(q0, q1, g1, epsilon_hat, y, data.t, fluctuation_kind, y_range, truncated)
    logger.info(f"TMLE: epsilon={epsilon_hat:.6g}, ate={estimate.ate:.6f} (se {estimate.se:.6f}), "
                f"mean IC={estimate.mean_ic:.3e}, truncated={truncated}")
    return estimate
