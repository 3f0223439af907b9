"""Splitting and standardization of causal datasets."""
import logging
from typing import Optional, Tuple

import numpy as np

from data.models import CausalDataset, SplitSpec, Standardization
from utils.errors import ConfigError, ContractError

logger = logging.getLogger(__name__)

STANDARDIZE_TARGETS = ("outcome", "continuous_covariates")


def split_sizes(n: int, spec: SplitSpec) -> Tuple[int, int, int]:
    """Validation and test take floor(fraction * n) units, train keeps the remainder."""
    _, f_val, f_test = spec.fractions
    n_val = int(np.floor(f_val * n + 1e-9))
    n_test = int(np.floor(f_test * n + 1e-9))
    sizes = (n - n_val - n_test, n_val, n_test)
    if min(sizes) <= 0:
        raise ConfigError(f"split {spec.fractions} of {n} units leaves an empty partition: {sizes}")
    return sizes


def split_indices(n: int, spec: SplitSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded shuffle of range(n) cut into contiguous train/val/test blocks."""
    n_train, n_val, _ = split_sizes(n, spec)
    order = np.random.default_rng(spec.seed).permutation(n)
    return order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:]


def split(data: CausalDataset, spec: SplitSpec) -> Tuple[CausalDataset, CausalDataset, CausalDataset]:
    """Partition a dataset into train, validation and test subsets.

    Args:
        data: Dataset to partition
        spec: Fractions and shuffling seed

    Returns:
        Tuple of (train, val, test) datasets

    Raises:
        ConfigError: Some partition would be empty
    """
    train_idx, val_idx, test_idx = split_indices(data.n, spec)
    logger.debug(f"Split {data.name}: train={len(train_idx)}, val={len(val_idx)}, test={len(test_idx)}")
    return data.subset(train_idx), data.subset(val_idx), data.subset(test_idx)


def fit_standardization(data: CausalDataset, which: str) -> Standardization:
    """Compute a transform record from ``data`` (the training split)."""
    if which == "outcome":
        if data.outcome_kind != "unbounded_continuous":
            raise ContractError(f"outcome standardization needs an unbounded outcome, got {data.outcome_kind}")
        mean, std = float(data.y.mean()), float(data.y.std())
        if not std > 0:
            logger.warning(f"Outcome of {data.name} has zero variance; left unscaled")
            mean, std = 0.0, 1.0
        return Standardization(which, (), np.array([mean]), np.array([std]))

    if which != "continuous_covariates":
        raise ContractError(f"unknown standardization target '{which}'")
    columns, means, stds = [], [], []
    for j in data.continuous_columns:
        std = float(data.x[:, j].std())
        if not std > 0:
            logger.warning(f"Covariate x{j} of {data.name} has zero variance; skipped")
            continue
        columns.append(j)
        means.append(float(data.x[:, j].mean()))
        stds.append(std)
    return Standardization(which, tuple(columns), np.array(means), np.array(stds))


def apply_standardization(data: CausalDataset, record: Standardization) -> CausalDataset:
    if record.which == "outcome":
        mu0 = None if data.mu0 is None else record.transform_values(data.mu0)
        mu1 = None if data.mu1 is None else record.transform_values(data.mu1)
        return data.replace(y=record.transform_values(data.y), mu0=mu0, mu1=mu1)
    return data.replace(x=record.transform_values(data.x))


def invert_standardization(data: CausalDataset, record: Standardization) -> CausalDataset:
    if record.which == "outcome":
        mu0 = None if data.mu0 is None else record.invert_values(data.mu0)
        mu1 = None if data.mu1 is None else record.invert_values(data.mu1)
        return data.replace(y=record.invert_values(data.y), mu0=mu0, mu1=mu1)
    return data.replace(x=record.invert_values(data.x))


def standardize(data: CausalDataset, which: str,
                record: Optional[Standardization] = None) -> Tuple[CausalDataset, Standardization]:
    """Apply (v - mean) / std to the outcome or to the continuous covariates.

    Statistics come from ``data`` unless a ``record`` fitted on the training split is
    supplied, which is how validation and test splits are transformed.

    Args:
        data: Dataset to transform
        which: "outcome" or "continuous_covariates"
        record: Previously fitted transform to reuse

    Returns:
        Tuple of (transformed dataset, transform record)
    """
    if which not in STANDARDIZE_TARGETS:
        raise ContractError(f"unknown standardization target '{which}'")
    if record is None:
        record = fit_standardization(data, which)
    elif record.which != which:
        raise ContractError(f"record standardizes '{record.which}', not '{which}'")
    return apply_standardization(data, record), record
