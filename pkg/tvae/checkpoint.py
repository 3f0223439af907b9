"""JSON checkpoints of a model's parameters, config and standardization records.

Layout (``format_version`` 1)::

    {
      "format_version": 1,
      "config": {...TvaeConfig fields...},
      "covariate_kinds": ["binary", "continuous", ...],
      "trained": true,
      "covariate_transform": {"which": ..., "columns": [...], "means": [...], "stds": [...]} | null,
      "outcome_transform": {...} | null,
      "parameters": {"f1.0.W": {"shape": [8, 20], "data": [... row-major floats ...]}, ...}
    }

Floats are written with ``repr`` precision, so loading restores every value exactly.
"""
import json
import logging
from pathlib import Path
from typing import Union

import numpy as np

from data.models import Standardization
from tvae.config import TvaeConfig
from tvae.model import TvaeModel
from utils.constants import CHECKPOINT_FORMAT_VERSION
from utils.errors import ParseError

logger = logging.getLogger(__name__)


def checkpoint_payload(model: TvaeModel) -> dict:
    return {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": model.config.to_dict(),
        "covariate_kinds": list(model.covariate_kinds),
        "trained": model.trained,
        "covariate_transform": model.covariate_transform.to_dict() if model.covariate_transform else None,
        "outcome_transform": model.outcome_transform.to_dict() if model.outcome_transform else None,
        "parameters": {
            name: {"shape": list(node.shape), "data": node.value.reshape(-1).tolist()}
            for name, node in model.parameters().items()
        },
    }


def write_payload(payload: dict, path: Union[str, Path]) -> Path:
    """Write a checkpoint payload to ``path`` (parent directories are created)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f)
    logger.info(f"Saved checkpoint to {path}")
    return path


def save_checkpoint(model: TvaeModel, path: Union[str, Path]) -> Path:
    return write_payload(checkpoint_payload(model), path)


def model_from_payload(payload: dict) -> TvaeModel:
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ParseError(f"unsupported checkpoint format_version {version!r}")
    try:
        model = TvaeModel(TvaeConfig.from_dict(payload["config"]), payload["covariate_kinds"])
        values = {name: np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
                  for name, entry in payload["parameters"].items()}
        model.restore(values)
        model.trained = bool(payload["trained"])
        if payload.get("covariate_transform"):
            model.covariate_transform = Standardization.from_dict(payload["covariate_transform"])
        if payload.get("outcome_transform"):
            model.outcome_transform = Standardization.from_dict(payload["outcome_transform"])
    except (KeyError, TypeError) as e:
        raise ParseError(f"malformed checkpoint: {e}") from e
    return model


def load_checkpoint(path: Union[str, Path]) -> TvaeModel:
    """Rebuild a model saved by :func:`save_checkpoint`.

    Raises:
        ParseError: Unreadable JSON, wrong format version or missing fields
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            payload = json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"checkpoint {path} is not valid JSON: {e.msg}", row=e.lineno) from e
    model = model_from_payload(payload)
    logger.info(f"Loaded checkpoint {path} ({len(payload['parameters'])} parameter tensors)")
    return model
