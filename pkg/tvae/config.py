"""Model hyperparameters, presets and ablation variants."""
import dataclasses
import logging
from dataclasses import dataclass
from typing import Any, Dict

from utils.constants import ABLATION_VARIANTS, FULL_MODEL_VARIANT, OUTCOME_KINDS
from utils.errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TvaeConfig:
    """Latent sizes, network sizes and optimization settings of one model."""
    d_zt: int = 2
    d_zy: int = 2
    d_zc: int = 2
    d_zo: int = 1
    hidden_neurons: int = 20
    hidden_layers: int = 2
    lambda_tl: float = 0.1
    beta: float = 1.0
    lr: float = 1e-2
    lr_decay: float = 5e-3
    weight_decay: float = 1e-4
    batch_size: int = 200
    epochs: int = 40
    outcome_kind: str = "unbounded_continuous"
    n_effect_samples: int = 100
    seed: int = 0
    stop_propensity_gradient: bool = True
    variant: str = FULL_MODEL_VARIANT

    def __post_init__(self):
        for name in ("d_zt", "d_zy", "d_zc", "hidden_neurons", "hidden_layers",
                     "batch_size", "epochs", "n_effect_samples"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.d_zo < 0:
            raise ConfigError(f"d_zo must be non-negative, got {self.d_zo}")
        for name in ("lambda_tl", "beta", "lr_decay", "weight_decay"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        if not self.lr > 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.outcome_kind not in OUTCOME_KINDS:
            raise ConfigError(f"unknown outcome kind '{self.outcome_kind}'")
        if self.variant not in ABLATION_VARIANTS:
            raise ConfigError(f"unknown variant '{self.variant}'")

    @property
    def total_latent_dims(self) -> int:
        return self.d_zt + self.d_zy + self.d_zc + self.d_zo

    def replace(self, **changes) -> "TvaeConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "TvaeConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(payload) - known)
        if unknown:
            raise ConfigError(f"unknown model settings: {', '.join(unknown)}")
        return cls(**payload)


def adam_step_size(per_unit_lr: float, batch_size: int) -> float:
    """Adam step size of a learning rate quoted per unit of a batch-summed objective.

    The objective here is a batch mean, so the quoted rate is scaled by the batch size:
    5e-5 per unit at batch 200 is a step size of 1e-2.
    """
    return per_unit_lr * batch_size


PRESETS: Dict[str, Dict[str, Any]] = {
    "tvaesynth": dict(d_zt=2, d_zy=2, d_zc=2, d_zo=1, hidden_neurons=20, hidden_layers=2,
                      lambda_tl=0.1, lr=adam_step_size(5e-5, 200), lr_decay=5e-3, weight_decay=1e-4,
                      batch_size=200, epochs=40, outcome_kind="unbounded_continuous"),
    "ihdp": dict(d_zt=10, d_zy=10, d_zc=15, d_zo=5, hidden_neurons=300, hidden_layers=3,
                 lambda_tl=0.4, lr=adam_step_size(5e-5, 200), lr_decay=5e-4, weight_decay=1e-4,
                 batch_size=200, epochs=200, outcome_kind="unbounded_continuous"),
    "jobs": dict(d_zt=6, d_zy=6, d_zc=8, d_zo=4, hidden_neurons=200, hidden_layers=3,
                 lambda_tl=0.1, lr=adam_step_size(1e-5, 200), lr_decay=5e-4, weight_decay=1e-4,
                 batch_size=200, epochs=200, outcome_kind="binary"),
}


def from_preset(name: str, **overrides) -> TvaeConfig:
    """Config of a named hyperparameter regime with ``overrides`` applied."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}'; choose from {sorted(PRESETS)}")
    return TvaeConfig.from_dict({**PRESETS[name], **overrides})


def variant_config(config: TvaeConfig, variant: str) -> TvaeConfig:
    """Derive an ablation variant from the configured full model.

    Variants without z_o fold its dimensions into z_c so total capacity is unchanged;
    ``+z_o*`` adds z_o on top of the enlarged z_c. Variants without ξ train with
    λ_TL = 0, and ``+z_o+ξ*`` lets the regularizer reach the propensity parameters.

    Raises:
        ConfigError: Unknown variant name
    """
    if variant not in ABLATION_VARIANTS:
        raise ConfigError(f"unknown ablation variant '{variant}'; choose from {ABLATION_VARIANTS}")
    folded_zc = config.d_zc + config.d_zo
    dims = {
        "base": dict(d_zo=0, d_zc=folded_zc),
        "+ξ": dict(d_zo=0, d_zc=folded_zc),
        "+z_o*": dict(d_zo=config.d_zo, d_zc=folded_zc),
    }.get(variant, dict(d_zo=config.d_zo, d_zc=config.d_zc))
    uses_xi = "ξ" in variant
    if uses_xi and config.lambda_tl == 0:
        logger.warning(f"Variant {variant} requested with lambda_tl=0; the regularizer has no effect")
    return config.replace(
        **dims,
        lambda_tl=config.lambda_tl if uses_xi else 0.0,
        stop_propensity_gradient=variant != "+z_o+ξ*",
        variant=variant,
    )
