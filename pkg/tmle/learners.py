"""Initial outcome and propensity estimators for targeted learning."""
import logging
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import optimize, special

from diffcore import MLP, Adam, backward, constant, reduce_mean, sigmoid_cross_entropy, square, sub
from utils.constants import LEARNER_KINDS, PROB_CLAMP
from utils.errors import ConfigError, ContractError, DegenerateDataError

logger = logging.getLogger(__name__)

TASKS = ("classification", "regression")


def outcome_features(x: np.ndarray, t) -> np.ndarray:
    """Covariates with the treatment appended as the last column."""
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (x.shape[0],))
    return np.column_stack([x, t])


class BaseLearner:
    """Logistic/linear regression, a small MLP, or an intercept-only model.

    Classification learners emit probabilities in (0, 1); regression learners emit reals.
    Training stops once the loss changes by less than ``tol`` between iterations.
    """

    def __init__(self, learner_kind: str, task: str, tol: float = 1e-6, max_iter: int = 5000,
                 seed: int = 0, hidden_neurons: int = 32, hidden_layers: int = 2, lr: float = 1e-2):
        if learner_kind not in LEARNER_KINDS:
            raise ConfigError(f"unknown learner kind '{learner_kind}'")
        if task not in TASKS:
            raise ConfigError(f"unknown learner task '{task}'")
        self.learner_kind = learner_kind
        self.task = task
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed
        self.hidden_neurons = hidden_neurons
        self.hidden_layers = hidden_layers
        self.lr = lr

        self.fitted = False
        self.n_iter = 0
        self._mean: Optional[np.ndarray] = None
        self._scale: Optional[np.ndarray] = None
        self._coef: Optional[np.ndarray] = None
        self._net: Optional[MLP] = None
        self._intercept = 0.0

    def _standardize(self, features: np.ndarray) -> np.ndarray:
        return (features - self._mean) / self._scale

    def fit(self, features: np.ndarray, target: np.ndarray) -> "BaseLearner":
        """Fit on a feature matrix [n x k] and a target vector [n]."""
        features = np.asarray(features, dtype=np.float64)
        target = np.asarray(target, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] != target.shape[0]:
            raise ContractError(f"features {features.shape} do not match target {target.shape}")
        self._mean = features.mean(axis=0)
        scale = features.std(axis=0)
        self._scale = np.where(scale > 0, scale, 1.0)

        if self.learner_kind == "constant":
            self._intercept = float(target.mean())
        elif self.learner_kind == "logistic_linear":
            self._fit_linear(self._standardize(features), target)
        else:
            self._fit_mlp(self._standardize(features), target)
        self.fitted = True
        logger.debug(f"Fitted {self.learner_kind} {self.task} learner in {self.n_iter} iterations")
        return self

    def _fit_linear(self, features: np.ndarray, target: np.ndarray):
        design = np.column_stack([np.ones(len(target)), features])
        n = len(target)

        def objective(theta):
            eta = design @ theta
            if self.task == "classification":
                loss = np.mean(np.logaddexp(0.0, eta) - target * eta)
                residual = special.expit(eta) - target
            else:
                residual = eta - target
                loss = 0.5 * np.mean(residual ** 2)
            return loss, design.T @ residual / n

        result = optimize.minimize(objective, np.zeros(design.shape[1]), jac=True, method="L-BFGS-B",
                                   options={"ftol": self.tol, "maxiter": self.max_iter})
        if not result.success:
            logger.warning(f"Linear learner stopped early: {result.message}")
        self._coef = result.x
        self.n_iter = int(result.nit)

    def _fit_mlp(self, features: np.ndarray, target: np.ndarray):
        rng = np.random.default_rng(self.seed)
        self._net = MLP(features.shape[1], self.hidden_neurons, self.hidden_layers, 1, rng, "learner")
        optimizer = Adam(self._net.parameters(), lr=self.lr)
        x, y = constant(features), constant(target[:, None])
        previous = np.inf
        for step in range(1, self.max_iter + 1):
            out = self._net(x)
            if self.task == "classification":
                loss = reduce_mean(sigmoid_cross_entropy(out, y))
            else:
                loss = reduce_mean(square(sub(out, y)))
            optimizer.zero_grad()
            backward(loss)
            optimizer.step()
            self.n_iter = step
            if abs(previous - loss.item()) < self.tol:
                break
            previous = loss.item()

    def decision_function(self, features: np.ndarray) -> np.ndarray:
        """Linear predictor (logit scale for classification)."""
        if not self.fitted:
            raise ContractError("learner has not been fitted")
        features = self._standardize(np.asarray(features, dtype=np.float64))
        if self.learner_kind == "constant":
            if self.task == "classification":
                p = np.clip(self._intercept, PROB_CLAMP, 1.0 - PROB_CLAMP)
                return np.full(features.shape[0], special.logit(p))
            return np.full(features.shape[0], self._intercept)
        if self.learner_kind == "logistic_linear":
            return self._coef[0] + features @ self._coef[1:]
        return self._net(constant(features)).value[:, 0]

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Probabilities for classification, reals for regression."""
        eta = self.decision_function(features)
        if self.task == "classification":
            return special.expit(eta)
        return eta

    def coefficients(self) -> Tuple[float, np.ndarray]:
        """Intercept and slopes of a linear learner on the original feature scale."""
        if self.learner_kind != "logistic_linear" or not self.fitted:
            raise ContractError("coefficients exist only for a fitted logistic_linear learner")
        slopes = self._coef[1:] / self._scale
        return float(self._coef[0] - np.sum(slopes * self._mean)), slopes


def fit_initial(data, learner_kind: str = "logistic_linear", propensity_learner_kind: Optional[str] = None,
                tol: float = 1e-6, max_iter: int = 5000, seed: int = 0) -> Tuple[BaseLearner, BaseLearner]:
    """Fit the initial outcome regression and the propensity model.

    Args:
        data: CausalDataset with x, t, y
        learner_kind: Kind for the outcome model on (x, t) -> y
        propensity_learner_kind: Kind for x -> t; defaults to ``learner_kind``
        tol: Convergence tolerance on the loss change
        max_iter: Iteration cap for either learner
        seed: Initialization seed for MLP learners

    Returns:
        Tuple of (outcome learner, propensity learner)

    Raises:
        DegenerateDataError: Every unit has the same treatment
    """
    treated = int(data.t.sum())
    if treated == 0 or treated == data.n:
        raise DegenerateDataError(f"treatment column has a single class ({treated} of {data.n} treated)")

    outcome_task = "classification" if data.outcome_kind == "binary" else "regression"
    outcome = BaseLearner(learner_kind, outcome_task, tol=tol, max_iter=max_iter, seed=seed)
    outcome.fit(outcome_features(data.x, data.t), data.y)
    propensity = BaseLearner(propensity_learner_kind or learner_kind, "classification",
                             tol=tol, max_iter=max_iter, seed=seed + 1)
    propensity.fit(data.x, data.t)
    logger.info(f"Initial estimators: outcome={outcome.learner_kind} ({outcome.n_iter} it), "
                f"propensity={propensity.learner_kind} ({propensity.n_iter} it)")
    return outcome, propensity


def predict_potential_outcomes(outcome: BaseLearner, x: np.ndarray) -> Dict[int, np.ndarray]:
    """Outcome predictions with every unit set to t=1 and to t=0."""
    return {arm: outcome.predict(outcome_features(x, float(arm))) for arm in (1, 0)}
