"""Validation helpers for experiment configuration files."""
import logging
from typing import Any, Iterable, List, Mapping, Optional, Sequence

from .constants import ABLATION_VARIANTS
from .errors import ConfigError

logger = logging.getLogger(__name__)


def validate_keys(block: Any, allowed: Iterable[str], where: str) -> Mapping[str, Any]:
    """Reject anything but a mapping whose keys all belong to ``allowed``.

    Args:
        block: Parsed JSON value
        allowed: Permitted key names
        where: Dotted path of the block, used in messages

    Returns:
        The block itself
    """
    if not isinstance(block, Mapping):
        raise ConfigError(f"'{where}' must be an object, got {type(block).__name__}")
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        path = ", ".join(f"{where}.{key}" if where else key for key in unknown)
        raise ConfigError(f"unknown config key(s): {path}")
    return block


def validate_choice(value: Any, choices: Sequence[str], where: str) -> str:
    """Exact match against a fixed vocabulary."""
    if value not in choices:
        raise ConfigError(f"'{where}' must be one of {list(choices)}, got {value!r}")
    return value


def validate_int(value: Any, where: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{where}' must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"'{where}' must be at least {minimum}, got {value}")
    return value


def validate_number(value: Any, where: str, minimum: Optional[float] = None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{where}' must be a number, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"'{where}' must be at least {minimum}, got {value}")
    return float(value)


def validate_fractions(value: Any, where: str) -> tuple:
    """Three non-negative numbers summing to 1 within 1e-9."""
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"'{where}' must list three fractions, got {value!r}")
    fractions = tuple(validate_number(v, where, minimum=0.0) for v in value)
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"'{where}' must sum to 1, got {sum(fractions)}")
    return fractions


def validate_variants(value: Any, where: str) -> List[str]:
    """Ordered, duplicate-free variant names from the ablation vocabulary."""
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"'{where}' must be a non-empty list of variant names")
    variants = [validate_choice(v, ABLATION_VARIANTS, where) for v in value]
    if len(set(variants)) != len(variants):
        raise ConfigError(f"'{where}' repeats a variant: {variants}")
    return variants
