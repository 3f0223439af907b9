"""Treatment-effect evaluation functionals."""
import logging
from typing import Optional, Union

import numpy as np

from metrics.report import MetricsReport
from utils.constants import SCOPES
from utils.errors import ContractError, DimensionError

logger = logging.getLogger(__name__)

ArrayOrScalar = Union[np.ndarray, float]


def _vector(values, label: str) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise ContractError(f"'{label}' is empty")
    return values


def eate(tau_hat, tau_true: ArrayOrScalar) -> float:
    """Absolute error of the average effect, |mean(tau_hat) - mean(tau_true)|.

    Args:
        tau_hat: Estimated per-unit effects
        tau_true: True per-unit effects or a scalar ATE

    Raises:
        ContractError: Empty input
        DimensionError: Per-unit vectors of different lengths
    """
    tau_hat = _vector(tau_hat, "tau_hat")
    if np.ndim(tau_true) == 0:
        return float(abs(tau_hat.mean() - float(tau_true)))
    tau_true = _vector(tau_true, "tau_true")
    if tau_true.shape != tau_hat.shape:
        raise DimensionError(f"tau_hat has {tau_hat.size} units, tau_true {tau_true.size}")
    return float(abs(tau_hat.mean() - tau_true.mean()))


def pehe(tau_hat, tau_true) -> float:
    """Root mean squared error of per-unit effects."""
    if np.ndim(tau_true) == 0:
        raise ContractError("PEHE needs per-unit true effects, got a scalar")
    tau_hat = _vector(tau_hat, "tau_hat")
    tau_true = _vector(tau_true, "tau_true")
    if tau_true.shape != tau_hat.shape:
        raise DimensionError(f"tau_hat has {tau_hat.size} units, tau_true {tau_true.size}")
    return float(np.sqrt(np.mean((tau_hat - tau_true) ** 2)))


def _rct_arrays(y, t, rct_flag, *others):
    y, t = _vector(y, "y"), _vector(t, "t")
    rct = np.asarray(rct_flag, dtype=bool).reshape(-1)
    arrays = [y, t] + [_vector(v, "prediction") for v in others]
    if any(a.shape != rct.shape for a in arrays):
        raise DimensionError("outcome, treatment, RCT flag and predictions must have equal lengths")
    return [a[rct] for a in arrays]


def eatt(y, t, rct_flag, q1_hat, q0_hat) -> float:
    """Error on the effect on the treated, measured against the randomized subset.

    |[mean(y over T1) - mean(y over T0)] - mean(q1_hat - q0_hat over T1)|, where T1 and T0
    are the treated and control units with ``rct_flag`` set.

    Raises:
        ContractError: No treated or no control randomized units
    """
    y, t, q1_hat, q0_hat = _rct_arrays(y, t, rct_flag, q1_hat, q0_hat)
    treated, control = t == 1, t == 0
    if not treated.any() or not control.any():
        raise ContractError(f"eATT needs treated and control RCT units, got {treated.sum()} and {control.sum()}")
    att_true = y[treated].mean() - y[control].mean()
    att_hat = np.mean(q1_hat[treated] - q0_hat[treated])
    return float(abs(att_true - att_hat))


def policy_risk(y, t, rct_flag, tau_hat, alpha: float = 0.0) -> Optional[float]:
    """Loss from treating the randomized units whose predicted effect exceeds ``alpha``.

    1 - [E(y | t=1, π=1) P(π=1) + E(y | t=0, π=0) P(π=0)]. A policy arm that no unit
    falls into contributes nothing; an arm with units but no randomized unit whose
    observed treatment agrees leaves the risk undefined.

    Returns:
        Policy risk, or None when an occupied policy arm has no agreeing unit
    """
    y, t, tau_hat = _rct_arrays(y, t, rct_flag, tau_hat)
    if y.size == 0:
        raise ContractError("policy risk needs at least one RCT unit")
    policy = tau_hat > alpha
    value = 0.0
    for arm in (1.0, 0.0):
        in_arm = policy == bool(arm)
        p_arm = in_arm.mean()
        if p_arm == 0:
            continue
        agree = in_arm & (t == arm)
        if not agree.any():
            logger.debug(f"Policy arm {int(arm)} has no agreeing units; policy risk undefined")
            return None
        value += y[agree].mean() * p_arm
    return float(1.0 - value)


def evaluate_effects(data, q1, q0, scope: str, alpha: float = 0.0) -> MetricsReport:
    """Every computable metric for one replication on one scope.

    Args:
        data: CausalDataset the predictions were made for (original outcome scale)
        q1: Predicted outcome under treatment, per unit
        q0: Predicted outcome under control, per unit
        scope: "within_sample" or "out_of_sample"
        alpha: Policy threshold

    Returns:
        Single-replication MetricsReport; metrics without the needed ground truth are None
    """
    if scope not in SCOPES:
        raise ContractError(f"unknown scope '{scope}'")
    q1, q0 = np.asarray(q1, dtype=np.float64), np.asarray(q0, dtype=np.float64)
    tau_hat = q1 - q0
    report = MetricsReport(scope=scope)
    if data.has_ground_truth:
        report.eate = eate(tau_hat, data.tau_true)
        report.pehe = pehe(tau_hat, data.tau_true)
    if data.rct_flag is not None:
        try:
            report.eatt = eatt(data.y, data.t, data.rct_flag, q1, q0)
        except ContractError as e:
            logger.warning(f"eATT not computable on {scope}: {e}")
        report.policy_risk = policy_risk(data.y, data.t, data.rct_flag, tau_hat, alpha)
    return report
