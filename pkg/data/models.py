"""Data models for causal datasets and their splits."""
import dataclasses
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from utils.constants import COVARIATE_KINDS, OUTCOME_KINDS
from utils.errors import ConfigError, ContractError, InputError


def _frozen(array: Optional[np.ndarray], dtype=np.float64) -> Optional[np.ndarray]:
    if array is None:
        return None
    array = np.array(array, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class CausalDataset:
    """Per-unit covariates, binary treatment and outcome, with optional ground truth."""
    x: np.ndarray
    t: np.ndarray
    y: np.ndarray
    covariate_kinds: Tuple[str, ...]
    mu0: Optional[np.ndarray] = None
    mu1: Optional[np.ndarray] = None
    rct_flag: Optional[np.ndarray] = None
    latents: Optional[Dict[str, np.ndarray]] = None
    outcome_kind: str = "unbounded_continuous"
    name: str = "dataset"

    def __post_init__(self):
        x = _frozen(self.x)
        if x.ndim != 2:
            raise InputError(f"covariates must be a 2-D array, got shape {x.shape}")
        n = x.shape[0]
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", _frozen(self.t))
        object.__setattr__(self, "y", _frozen(self.y))
        object.__setattr__(self, "mu0", _frozen(self.mu0))
        object.__setattr__(self, "mu1", _frozen(self.mu1))
        object.__setattr__(self, "rct_flag", _frozen(self.rct_flag, dtype=bool))
        object.__setattr__(self, "covariate_kinds", tuple(self.covariate_kinds))
        if self.latents is not None:
            object.__setattr__(self, "latents", {k: _frozen(v) for k, v in self.latents.items()})

        for label in ("t", "y", "mu0", "mu1", "rct_flag"):
            values = getattr(self, label)
            if values is not None and values.shape != (n,):
                raise InputError(f"'{label}' has shape {values.shape}, expected ({n},)")
        if (self.mu0 is None) != (self.mu1 is None):
            raise InputError("mu0 and mu1 must be given together")
        if np.any((self.t != 0) & (self.t != 1)):
            raise InputError("treatment must be binary")
        if len(self.covariate_kinds) != x.shape[1]:
            raise InputError(f"{len(self.covariate_kinds)} covariate kinds for {x.shape[1]} columns")
        for j, kind in enumerate(self.covariate_kinds):
            if kind not in COVARIATE_KINDS:
                raise InputError(f"unknown covariate kind '{kind}' for column x{j}")
            if kind == "binary" and np.any((x[:, j] != 0) & (x[:, j] != 1)):
                raise InputError(f"binary column x{j} holds values other than 0/1")
        if self.outcome_kind not in OUTCOME_KINDS:
            raise InputError(f"unknown outcome kind '{self.outcome_kind}'")
        if self.outcome_kind == "binary" and np.any((self.y != 0) & (self.y != 1)):
            raise InputError("binary outcome holds values other than 0/1")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def m(self) -> int:
        return self.x.shape[1]

    @property
    def binary_columns(self) -> Tuple[int, ...]:
        return tuple(j for j, kind in enumerate(self.covariate_kinds) if kind == "binary")

    @property
    def continuous_columns(self) -> Tuple[int, ...]:
        return tuple(j for j, kind in enumerate(self.covariate_kinds) if kind == "continuous")

    @property
    def has_ground_truth(self) -> bool:
        return self.mu0 is not None

    @property
    def tau_true(self) -> Optional[np.ndarray]:
        """Per-unit noiseless effect mu1 - mu0, when known."""
        if not self.has_ground_truth:
            return None
        return self.mu1 - self.mu0

    def subset(self, indices: Sequence[int]) -> "CausalDataset":
        """Rows ``indices`` as a new dataset."""
        idx = np.asarray(indices, dtype=np.int64)

        def take(values):
            return None if values is None else values[idx]

        latents = None if self.latents is None else {k: v[idx] for k, v in self.latents.items()}
        return CausalDataset(
            x=self.x[idx], t=self.t[idx], y=self.y[idx],
            covariate_kinds=self.covariate_kinds,
            mu0=take(self.mu0), mu1=take(self.mu1), rct_flag=take(self.rct_flag),
            latents=latents, outcome_kind=self.outcome_kind, name=self.name,
        )

    def replace(self, **changes) -> "CausalDataset":
        return dataclasses.replace(self, **changes)

    def with_outcome(self, y: np.ndarray, outcome_kind: Optional[str] = None) -> "CausalDataset":
        """Same units and covariates with a different outcome column."""
        return self.replace(y=y, outcome_kind=outcome_kind or self.outcome_kind)

    def summary(self) -> Dict[str, float]:
        """Headline statistics printed by the generate command."""
        stats = {
            "n": float(self.n),
            "m": float(self.m),
            "treated_fraction": float(self.t.mean()),
            "outcome_mean": float(self.y.mean()),
        }
        if self.has_ground_truth:
            stats["ate"] = float(self.tau_true.mean())
        if self.rct_flag is not None:
            stats["rct_units"] = float(self.rct_flag.sum())
        return stats


@dataclass(frozen=True)
class SplitSpec:
    """Train/validation/test fractions and the shuffling seed."""
    fractions: Tuple[float, float, float] = (0.6, 0.3, 0.1)
    seed: int = 0

    def __post_init__(self):
        fractions = tuple(float(f) for f in self.fractions)
        object.__setattr__(self, "fractions", fractions)
        if len(fractions) != 3:
            raise ConfigError(f"split needs three fractions, got {len(fractions)}")
        if any(f < 0 for f in fractions):
            raise ConfigError(f"split fractions must be non-negative: {fractions}")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {sum(fractions)}")


@dataclass(frozen=True)
class Standardization:
    """Record of a (v - mean) / std transform, invertible exactly."""
    which: str
    columns: Tuple[int, ...] = ()
    means: np.ndarray = field(default_factory=lambda: np.zeros(0))
    stds: np.ndarray = field(default_factory=lambda: np.ones(0))

    def transform_values(self, values: np.ndarray) -> np.ndarray:
        values = np.array(values, dtype=np.float64)
        if self.which == "outcome":
            return (values - self.means[0]) / self.stds[0]
        if self.columns:
            cols = list(self.columns)
            values[:, cols] = (values[:, cols] - self.means) / self.stds
        return values

    def invert_values(self, values: np.ndarray) -> np.ndarray:
        values = np.array(values, dtype=np.float64)
        if self.which == "outcome":
            return values * self.stds[0] + self.means[0]
        if self.columns:
            cols = list(self.columns)
            values[:, cols] = values[:, cols] * self.stds + self.means
        return values

    def scale_effect(self, effect: np.ndarray) -> np.ndarray:
        """Map a difference of outcomes back to the original scale."""
        if self.which != "outcome":
            raise ContractError("only an outcome transform rescales effects")
        return np.asarray(effect, dtype=np.float64) * self.stds[0]

    def to_dict(self) -> dict:
        return {
            "which": self.which,
            "columns": list(self.columns),
            "means": [float(v) for v in self.means],
            "stds": [float(v) for v in self.stds],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Standardization":
        return cls(which=payload["which"], columns=tuple(payload["columns"]),
                   means=np.asarray(payload["means"], dtype=np.float64),
                   stds=np.asarray(payload["stds"], dtype=np.float64))
