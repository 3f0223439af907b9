"""Mini-batch training with validation-based model selection."""
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from data.models import CausalDataset
from data.preprocessing import fit_standardization
from diffcore import Adam, backward, decay_mask
from tmle.estimator import efficient_influence_curve
from tvae.losses import Batch, total_loss
from tvae.model import TvaeModel
from utils.constants import PROPENSITY_CLAMP
from utils.errors import ContractError, TrainingAbortedError

logger = logging.getLogger(__name__)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_mean_ic: float
    epsilon: float
    train_xi: Optional[float] = None


@dataclass
class TrainingLog:
    """Per-epoch diagnostics plus the epoch whose parameters were kept."""
    records: List[EpochRecord] = field(default_factory=list)
    best_epoch: Optional[int] = None
    wall_clock_s: float = 0.0

    def series(self, name: str) -> List[float]:
        return [getattr(r, name) for r in self.records]

    def to_dict(self) -> dict:
        return {"best_epoch": self.best_epoch, "wall_clock_s": self.wall_clock_s,
                "epochs": [asdict(r) for r in self.records]}


def _check_finite(parts, epoch: int):
    for term, node in parts.items():
        value = node.item()
        if not np.isfinite(value):
            raise TrainingAbortedError(epoch, term, value)


def validation_mean_ic(model: TvaeModel, batch: Batch) -> float:
    """Mean efficient influence curve of the model's own heads at the posterior means."""
    posteriors = model.encode(batch.x)
    latents = model.sample_latents(posteriors, {f: np.zeros(q.mu.shape) for f, q in posteriors.items()})
    g1 = np.clip(model.propensity(latents).value[:, 0], *PROPENSITY_CLAMP)
    head1, head0 = model.outcome_heads(latents)
    q1 = model.outcome_mean(head1).value[:, 0]
    q0 = model.outcome_mean(head0).value[:, 0]
    ate = float(np.mean(q1 - q0))
    ic = efficient_influence_curve(batch.y[:, 0], batch.t[:, 0], q1, q0, g1, ate)
    return float(np.mean(ic))


def prepare_training_data(model: TvaeModel, train_set: CausalDataset,
                          val_set: CausalDataset) -> Tuple[Batch, Batch]:
    """Fit the covariate (and unbounded outcome) standardization on ``train_set``.

    The transforms are stored on the model and applied to both splits.
    """
    model.covariate_transform = fit_standardization(train_set, "continuous_covariates")
    model.outcome_transform = None
    if model.outcome_kind == "unbounded_continuous":
        model.outcome_transform = fit_standardization(train_set, "outcome")

    def to_batch(data: CausalDataset) -> Batch:
        return Batch.from_arrays(model.standardize_covariates(data.x), data.t, model.standardize_outcome(data.y))

    return to_batch(train_set), to_batch(val_set)


def train(model: TvaeModel, train_set: CausalDataset, val_set: CausalDataset) -> Tuple[TvaeModel, TrainingLog]:
    """Minimize the negative ELBO plus λ_TL·ξ with Adam, keeping the best validation epoch.

    Optimization settings are read from ``model.config``, the same settings the objective uses.

    Args:
        model: Freshly built model
        train_set: Training split
        val_set: Validation split used for model selection and diagnostics

    Returns:
        Tuple of (model restored to its best epoch and marked trained, training log)

    Raises:
        TrainingAbortedError: A loss term became non-finite
        OptimizerError: A gradient became non-finite
    """
    config = model.config
    if train_set.outcome_kind != model.outcome_kind:
        raise ContractError(f"model expects {model.outcome_kind} outcomes, data has {train_set.outcome_kind}")
    if tuple(train_set.covariate_kinds) != model.covariate_kinds:
        raise ContractError("dataset covariate schema differs from the model's")

    started = time.perf_counter()
    train_batch, val_batch = prepare_training_data(model, train_set, val_set)
    params = model.parameters()
    optimizer = Adam(params, lr=config.lr, weight_decay=config.weight_decay,
                     lr_decay=config.lr_decay, decay=decay_mask(params))
    rng = np.random.default_rng([config.seed, 1])
    val_rng_seed = [config.seed, 2]

    log = TrainingLog()
    best_loss, best_values = np.inf, model.snapshot()
    n = train_batch.size
    for epoch in range(config.epochs):
        optimizer.set_epoch(epoch)
        order = rng.permutation(n)
        total, xi_total = 0.0, 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            batch = Batch(train_batch.x[idx], train_batch.t[idx], train_batch.y[idx])
            parts = total_loss(model, batch, rng)
            _check_finite(parts, epoch)
            optimizer.zero_grad()
            backward(parts["total"])
            optimizer.step()
            total += parts["total"].item() * batch.size
            if "xi" in parts:
                xi_total += parts["xi"].item() * batch.size

        val_parts = total_loss(model, val_batch, np.random.default_rng(val_rng_seed))
        _check_finite(val_parts, epoch)
        record = EpochRecord(
            epoch=epoch,
            train_loss=total / n,
            val_loss=val_parts["total"].item(),
            val_mean_ic=validation_mean_ic(model, val_batch),
            epsilon=float(model.epsilon.value),
            train_xi=xi_total / n if config.lambda_tl > 0 else None,
        )
        log.records.append(record)
        if record.val_loss < best_loss:
            best_loss, best_values = record.val_loss, model.snapshot()
            log.best_epoch = epoch
        logger.info(f"Epoch {epoch + 1}/{config.epochs}: train={record.train_loss:.5f}, "
                    f"val={record.val_loss:.5f}, mean IC={record.val_mean_ic:.4f}, epsilon={record.epsilon:.5f}")

    model.restore(best_values)
    model.trained = True
    log.wall_clock_s = time.perf_counter() - started
    logger.info(f"Training finished in {log.wall_clock_s:.1f}s; kept epoch {log.best_epoch + 1}")
    return model, log
