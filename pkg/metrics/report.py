"""Metric records and their aggregation across replications."""
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from utils.constants import METRIC_NAMES
from utils.errors import ContractError

logger = logging.getLogger(__name__)


@dataclass
class MetricsReport:
    """Metric values for one scope; means and standard errors once aggregated."""
    scope: str
    eate: Optional[float] = None
    pehe: Optional[float] = None
    eatt: Optional[float] = None
    policy_risk: Optional[float] = None
    n_replications: int = 1
    standard_errors: Dict[str, Optional[float]] = field(default_factory=dict)

    def value(self, metric: str) -> Optional[float]:
        if metric not in METRIC_NAMES:
            raise ContractError(f"unknown metric '{metric}'")
        return getattr(self, metric)

    def se(self, metric: str) -> Optional[float]:
        return self.standard_errors.get(metric)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "MetricsReport":
        return cls(**payload)


def aggregate(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Mean and standard error (sample SD / sqrt(R)) of each metric across replications.

    A metric missing from some replications is averaged over those that have it. The
    standard error is None with fewer than two values.

    Raises:
        ContractError: No reports, or reports from different scopes
    """
    if not reports:
        raise ContractError("cannot aggregate zero reports")
    scopes = {r.scope for r in reports}
    if len(scopes) > 1:
        raise ContractError(f"cannot aggregate mixed scopes {sorted(scopes)}")

    result = MetricsReport(scope=reports[0].scope, n_replications=len(reports))
    for metric in METRIC_NAMES:
        values: List[float] = [r.value(metric) for r in reports if r.value(metric) is not None]
        if not values:
            result.standard_errors[metric] = None
            continue
        setattr(result, metric, float(np.mean(values)))
        if len(values) >= 2:
            result.standard_errors[metric] = float(np.std(values, ddof=1) / np.sqrt(len(values)))
        else:
            result.standard_errors[metric] = None
        if len(values) < len(reports):
            logger.warning(f"{metric} available in {len(values)} of {len(reports)} replications")
    return result
