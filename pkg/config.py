"""Configuration management: process settings and experiment files."""
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from dotenv import load_dotenv

from tvae.config import PRESETS, TvaeConfig, from_preset
from utils.constants import (
    ABLATION_VARIANTS, CONFIG_SCHEMA_VERSION, COVARIATE_KINDS, DATASET_SOURCES, LEARNER_KINDS,
    OUTCOME_KINDS, T_SOURCES,
)
from utils.errors import ConfigError
from utils.validators import (
    validate_choice, validate_fractions, validate_int, validate_keys, validate_number, validate_variants,
)

# Load environment variables from .env file
load_dotenv()

logger = logging.getLogger(__name__)


class Config:
    """Process-level settings read from the environment."""

    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
    LOG_FILE: str = os.getenv("LOG_FILE", "tvae.log")
    OUTPUT_DIR: str = os.getenv("OUTPUT_DIR", "runs")
    RESULTS_DB_PATH: str = os.getenv("RESULTS_DB_PATH", "runs/results.db")
    MAX_JOBS: int = int(os.getenv("MAX_JOBS", "1"))
    DEFAULT_SEED: int = int(os.getenv("DEFAULT_SEED", "0"))

    @classmethod
    def validate(cls) -> bool:
        """Validate the environment settings.

        Returns:
            bool: True if configuration is valid, False otherwise
        """
        valid = True
        if cls.LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            logger.error(f"LOG_LEVEL '{cls.LOG_LEVEL}' is not a logging level")
            valid = False
        if cls.MAX_JOBS < 1:
            logger.error(f"MAX_JOBS must be at least 1, got {cls.MAX_JOBS}")
            valid = False
        if cls.DEFAULT_SEED < 0:
            logger.error(f"DEFAULT_SEED must be non-negative, got {cls.DEFAULT_SEED}")
            valid = False
        return valid


# Model preset used when the experiment file does not name one
DEFAULT_PRESETS = {"tvaesynth": "tvaesynth", "linear": "tvaesynth", "ihdp_like": "ihdp",
                   "jobs_like": "jobs", "csv": "tvaesynth"}
DEFAULT_SIZES = {"tvaesynth": 2000, "linear": 5000, "ihdp_like": 747}
DEFAULT_SPLITS = {"jobs_like": (0.56, 0.24, 0.2)}


@dataclass
class DatasetSettings:
    source: str = "tvaesynth"
    path: Optional[str] = None
    n: Optional[int] = None
    split: tuple = (0.6, 0.3, 0.1)
    outcome_kind: Optional[str] = None
    covariate_kinds: Optional[List[str]] = None


@dataclass
class TmleSettings:
    learner_kind: str = "logistic_linear"
    propensity_learner_kind: Optional[str] = None
    tol: float = 1e-6
    max_iter: int = 5000


@dataclass
class EvaluationSettings:
    policy_alpha: float = 0.0
    t_source: str = "observed"
    n_effect_samples: Optional[int] = None


@dataclass
class ExperimentConfig:
    """A parsed experiment file."""
    schema_version: int = CONFIG_SCHEMA_VERSION
    seed: int = 0
    replications: int = 1
    output_dir: str = "runs"
    dataset: DatasetSettings = field(default_factory=DatasetSettings)
    model: TvaeConfig = field(default_factory=TvaeConfig)
    variants: List[str] = field(default_factory=lambda: list(ABLATION_VARIANTS))
    tmle: TmleSettings = field(default_factory=TmleSettings)
    evaluation: EvaluationSettings = field(default_factory=EvaluationSettings)

    def to_dict(self) -> Dict[str, Any]:
        """Echo in the file layout; loading it again gives an equal config."""
        return {
            "schema_version": self.schema_version,
            "seed": self.seed,
            "replications": self.replications,
            "output_dir": self.output_dir,
            "dataset": {**asdict(self.dataset), "split": list(self.dataset.split)},
            "model": self.model.to_dict(),
            "ablation": {"variants": list(self.variants)},
            "tmle": asdict(self.tmle),
            "evaluation": asdict(self.evaluation),
        }


def _dataset_settings(block: Dict[str, Any]) -> DatasetSettings:
    block = validate_keys(block, DatasetSettings.__dataclass_fields__, "dataset")
    settings = DatasetSettings(source=validate_choice(block.get("source", "tvaesynth"), DATASET_SOURCES,
                                                      "dataset.source"))
    if settings.source == "csv":
        if not block.get("path"):
            raise ConfigError("'dataset.path' is required when dataset.source is 'csv'")
        settings.path = str(block["path"])
    elif block.get("path") is not None:
        raise ConfigError(f"'dataset.path' only applies to csv sources, not '{settings.source}'")
    if block.get("n") is not None:
        settings.n = validate_int(block["n"], "dataset.n", minimum=1)
    else:
        settings.n = DEFAULT_SIZES.get(settings.source)
    settings.split = validate_fractions(block.get("split", DEFAULT_SPLITS.get(settings.source, settings.split)),
                                        "dataset.split")
    if block.get("outcome_kind") is not None:
        settings.outcome_kind = validate_choice(block["outcome_kind"], OUTCOME_KINDS, "dataset.outcome_kind")
    if block.get("covariate_kinds") is not None:
        settings.covariate_kinds = [validate_choice(k, COVARIATE_KINDS, "dataset.covariate_kinds")
                                    for k in block["covariate_kinds"]]
    return settings


def _model_config(block: Dict[str, Any], source: str) -> TvaeConfig:
    allowed = set(TvaeConfig.__dataclass_fields__) | {"preset"}
    block = dict(validate_keys(block, allowed, "model"))
    preset = block.pop("preset", DEFAULT_PRESETS[source])
    validate_choice(preset, sorted(PRESETS), "model.preset")
    return from_preset(preset, **block)


def experiment_config_from_dict(payload: Dict[str, Any]) -> ExperimentConfig:
    """Validate a parsed experiment file.

    Raises:
        ConfigError: Unknown key at any level, wrong schema version or invalid value
    """
    payload = validate_keys(payload, ("schema_version", "seed", "replications", "output_dir", "dataset",
                                      "model", "ablation", "tmle", "evaluation"), "")
    version = payload.get("schema_version", CONFIG_SCHEMA_VERSION)
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}; expected {CONFIG_SCHEMA_VERSION}")

    config = ExperimentConfig()
    config.seed = validate_int(payload.get("seed", Config.DEFAULT_SEED), "seed", minimum=0)
    config.replications = validate_int(payload.get("replications", 1), "replications", minimum=1)
    config.output_dir = str(payload.get("output_dir", Config.OUTPUT_DIR))
    config.dataset = _dataset_settings(payload.get("dataset", {}))
    config.model = _model_config(payload.get("model", {}), config.dataset.source)

    ablation = validate_keys(payload.get("ablation", {}), ("variants",), "ablation")
    if "variants" in ablation:
        config.variants = validate_variants(ablation["variants"], "ablation.variants")

    tmle = validate_keys(payload.get("tmle", {}), TmleSettings.__dataclass_fields__, "tmle")
    config.tmle = TmleSettings(
        learner_kind=validate_choice(tmle.get("learner_kind", "logistic_linear"), LEARNER_KINDS, "tmle.learner_kind"),
        propensity_learner_kind=(validate_choice(tmle["propensity_learner_kind"], LEARNER_KINDS,
                                                 "tmle.propensity_learner_kind")
                                 if tmle.get("propensity_learner_kind") else None),
        tol=validate_number(tmle.get("tol", 1e-6), "tmle.tol", minimum=0.0),
        max_iter=validate_int(tmle.get("max_iter", 5000), "tmle.max_iter", minimum=1),
    )

    evaluation = validate_keys(payload.get("evaluation", {}), EvaluationSettings.__dataclass_fields__, "evaluation")
    config.evaluation = EvaluationSettings(
        policy_alpha=validate_number(evaluation.get("policy_alpha", 0.0), "evaluation.policy_alpha"),
        t_source=validate_choice(evaluation.get("t_source", "observed"), T_SOURCES, "evaluation.t_source"),
        n_effect_samples=(validate_int(evaluation["n_effect_samples"], "evaluation.n_effect_samples", minimum=1)
                          if evaluation.get("n_effect_samples") is not None else None),
    )
    return config


def load_experiment_config(path: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    """Read an experiment JSON file; no path gives the defaults.

    Raises:
        ConfigError: Unreadable file, invalid JSON or invalid content
    """
    if path is None:
        return experiment_config_from_dict({})
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            payload = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e.msg} (line {e.lineno})") from e
    config = experiment_config_from_dict(payload)
    logger.info(f"Loaded experiment config {path} (dataset={config.dataset.source}, "
                f"replications={config.replications})")
    return config
