"""Database models for stored experiment runs."""
from dataclasses import dataclass
from datetime import datetime
from typing import Optional


@dataclass
class RunRecord:
    """One invocation of a command that produced results."""
    run_id: Optional[int]
    command: str
    dataset: str
    seed: int
    replications: int
    output_dir: str
    config_json: str
    status: str = "running"  # running, finished, failed
    created_at: Optional[datetime] = None
    finished_at: Optional[datetime] = None
    wall_clock_s: Optional[float] = None


@dataclass
class ReplicationMetric:
    """Metric values of one variant on one replication and scope."""
    metric_id: Optional[int]
    run_id: int
    replication: int
    variant: str
    scope: str
    eate: Optional[float] = None
    pehe: Optional[float] = None
    eatt: Optional[float] = None
    policy_risk: Optional[float] = None
    epsilon: Optional[float] = None
