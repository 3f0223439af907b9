"""Shared plumbing for the experiment commands: datasets, replications and report files."""
import asyncio
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from config import ExperimentConfig
from data import CausalDataset, SplitSpec, generate_linear_scm, generate_tvaesynth, ihdp_like, jobs_like, load_csv
from data.preprocessing import split_indices
from database.db import ResultsDatabase
from metrics import MetricsReport, aggregate, evaluate_effects
from tvae import TvaeModel, checkpoint_payload, estimate_effects, train, variant_config
from tvae.config import TvaeConfig
from utils.constants import SCOPES
from utils.errors import ConfigError
from utils.formatting import summary_frame
from utils.image_generator import generate_training_curves

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
SUMMARY_FILE = "summary.csv"
CHECKPOINT_FILE = "checkpoint.json"
CURVES_FILE = "training_curves.png"


def replication_seed(config: ExperimentConfig, replication: int) -> int:
    return config.seed + replication


def build_dataset(config: ExperimentConfig, seed: int) -> CausalDataset:
    """Generate or load the configured dataset.

    Args:
        config: Experiment configuration
        seed: Generator seed (ignored for csv sources)

    Returns:
        CausalDataset with the configured outcome kind override applied
    """
    settings = config.dataset
    if settings.source == "tvaesynth":
        data = generate_tvaesynth(settings.n, seed)
    elif settings.source == "linear":
        data = generate_linear_scm(settings.n, seed)
    elif settings.source == "ihdp_like":
        data = ihdp_like(seed, n=settings.n)
    elif settings.source == "jobs_like":
        data = jobs_like(seed)
    elif settings.source == "csv":
        data = load_csv(settings.path, settings.covariate_kinds, settings.outcome_kind)
    else:
        raise ConfigError(f"unknown dataset source '{settings.source}'")
    if settings.outcome_kind and data.outcome_kind != settings.outcome_kind:
        data = data.replace(outcome_kind=settings.outcome_kind)
    return data


def model_config(config: ExperimentConfig, data: CausalDataset, variant: str, seed: int) -> TvaeConfig:
    """The configured model adapted to ``data`` and ``variant``, seeded for one replication."""
    base = config.model
    if base.outcome_kind != data.outcome_kind:
        logger.info(f"Model outcome kind set to {data.outcome_kind} to match the dataset")
    changes: Dict[str, Any] = dict(outcome_kind=data.outcome_kind, seed=seed)
    if config.evaluation.n_effect_samples is not None:
        changes["n_effect_samples"] = config.evaluation.n_effect_samples
    return variant_config(base.replace(**changes), variant)


@dataclass
class VariantResult:
    """Outcome of training and scoring one variant on one replication."""
    variant: str
    reports: Dict[str, MetricsReport]
    training: dict
    epsilon: float
    ate_hat: float
    checkpoint: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "metrics": {scope: report.to_dict() for scope, report in self.reports.items()},
            "training": self.training,
            "epsilon": self.epsilon,
            "ate_hat": self.ate_hat,
        }


@dataclass
class ReplicationResult:
    replication: int
    seed: int
    variants: Dict[str, VariantResult] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"replication": self.replication, "seed": self.seed,
                "variants": {name: result.to_dict() for name, result in self.variants.items()}}


def scope_datasets(data: CausalDataset, config: ExperimentConfig, seed: int) -> Dict[str, CausalDataset]:
    """Train, validation, within-sample (train ∪ validation) and out-of-sample subsets."""
    train_idx, val_idx, test_idx = split_indices(data.n, SplitSpec(tuple(config.dataset.split), seed))
    return {
        "train": data.subset(train_idx),
        "val": data.subset(val_idx),
        "within_sample": data.subset(np.concatenate([train_idx, val_idx])),
        "out_of_sample": data.subset(test_idx),
    }


def score_model(model: TvaeModel, subsets: Dict[str, CausalDataset], config: ExperimentConfig,
                seed: int) -> Dict[str, MetricsReport]:
    """Effect estimates and metrics on both evaluation scopes."""
    reports = {}
    for scope in SCOPES:
        data = subsets[scope]
        estimates = estimate_effects(model, data.x, t_source=config.evaluation.t_source, t=data.t, seed=seed)
        reports[scope] = evaluate_effects(data, estimates.q1, estimates.q0, scope, config.evaluation.policy_alpha)
    return reports


def run_replication(config: ExperimentConfig, replication: int, variants: Sequence[str],
                    keep_checkpoint: bool = False) -> ReplicationResult:
    """Train and score every variant on one replication's dataset and split.

    All variants share the replication seed, so they see the same data, split and
    initialization stream.
    """
    seed = replication_seed(config, replication)
    data = build_dataset(config, seed)
    subsets = scope_datasets(data, config, seed)
    result = ReplicationResult(replication=replication, seed=seed)
    for variant in variants:
        model_settings = model_config(config, data, variant, seed)
        logger.info(f"Replication {replication} (seed {seed}): training variant {variant}")
        model = TvaeModel(model_settings, data.covariate_kinds)
        model, log = train(model, subsets["train"], subsets["val"])
        reports = score_model(model, subsets, config, seed)
        ate_hat = estimate_effects(model, data.x, t_source=config.evaluation.t_source, t=data.t, seed=seed).ate_hat
        result.variants[variant] = VariantResult(
            variant=variant,
            reports=reports,
            training=log.to_dict(),
            epsilon=float(model.epsilon.value),
            ate_hat=ate_hat,
            checkpoint=checkpoint_payload(model) if keep_checkpoint else None,
        )
    return result


async def run_replications(config: ExperimentConfig, variants: Sequence[str], jobs: int = 1,
                           keep_first_checkpoint: bool = False) -> List[ReplicationResult]:
    """Run every replication, in worker processes when ``jobs`` > 1.

    Results come back ordered by replication index whatever the completion order.
    """
    indices = list(range(config.replications))
    if jobs <= 1 or len(indices) == 1:
        return [run_replication(config, r, variants, keep_first_checkpoint and r == 0) for r in indices]

    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=min(jobs, len(indices))) as pool:
        futures = [loop.run_in_executor(pool, run_replication, config, r, list(variants),
                                        keep_first_checkpoint and r == 0) for r in indices]
        results = await asyncio.gather(*futures)
    return sorted(results, key=lambda result: result.replication)


def aggregate_results(results: Sequence[ReplicationResult],
                      variants: Sequence[str]) -> Dict[str, Dict[str, MetricsReport]]:
    """variant -> scope -> MetricsReport aggregated over replications."""
    table = {}
    for variant in variants:
        table[variant] = {scope: aggregate([r.variants[variant].reports[scope] for r in results])
                          for scope in SCOPES}
    return table


@dataclass
class RunReport:
    """Everything a command produced, written as ``report.json``."""
    command: str
    config: dict
    replications: List[dict] = field(default_factory=list)
    aggregate: Dict[str, Dict[str, dict]] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)
    wall_clock_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "replications": self.replications,
            "aggregate": self.aggregate,
            **self.extra,
            "wall_clock_s": self.wall_clock_s,
        }


def output_dir(config: ExperimentConfig, command: str) -> Path:
    path = Path(config.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    logger.debug(f"Writing {command} outputs to {path}")
    return path


def write_report(report: RunReport, out_dir: Path) -> Path:
    path = out_dir / REPORT_FILE
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2, default=_json_default)
    logger.info(f"Wrote {path}")
    return path


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def write_summary(table: Dict[str, Dict[str, MetricsReport]], out_dir: Path) -> Path:
    path = out_dir / SUMMARY_FILE
    summary_frame(table).to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
    logger.info(f"Wrote {path}")
    return path


def write_curves(training: dict, out_dir: Path) -> Path:
    """Render one training log (``TrainingLog.to_dict`` layout) to PNG."""
    epochs = training.get("epochs", [])
    series = {name: [record[name] for record in epochs] for name in ("train_loss", "val_loss", "val_mean_ic", "epsilon")}
    path = out_dir / CURVES_FILE
    with open(path, "wb") as f:
        f.write(generate_training_curves(series, training.get("best_epoch")).getvalue())
    logger.info(f"Wrote {path}")
    return path


class ExperimentCommand:
    """Base class of the commands: holds the results store and records runs in it."""

    name = "command"

    def __init__(self, db: Optional[ResultsDatabase] = None, jobs: int = 1):
        """Initialize the command.

        Args:
            db: Results store; None disables recording
            jobs: Worker processes for replications
        """
        self.db = db
        self.jobs = jobs

    async def start_run(self, config: ExperimentConfig) -> Optional[int]:
        if self.db is None:
            return None
        return await self.db.add_run(self.name, config.dataset.source, config.seed, config.replications,
                                     config.output_dir, json.dumps(config.to_dict()))

    async def record_results(self, run_id: Optional[int], results: Sequence[ReplicationResult]):
        if self.db is None or run_id is None:
            return
        for result in results:
            for variant, outcome in result.variants.items():
                await self.db.add_replication_metrics(run_id, result.replication, variant,
                                                      list(outcome.reports.values()), outcome.epsilon)

    async def finish_run(self, run_id: Optional[int], wall_clock_s: float, status: str = "finished"):
        if self.db is not None and run_id is not None:
            await self.db.finish_run(run_id, status, wall_clock_s)

    async def run(self, config: ExperimentConfig) -> RunReport:
        """Run the command, write ``report.json`` and record the run in the results store."""
        started = time.perf_counter()
        run_id = await self.start_run(config)
        try:
            report = await self.execute(config, run_id)
        except Exception:
            await self.finish_run(run_id, time.perf_counter() - started, status="failed")
            raise
        report.wall_clock_s = time.perf_counter() - started
        write_report(report, output_dir(config, self.name))
        await self.finish_run(run_id, report.wall_clock_s)
        return report

    async def execute(self, config: ExperimentConfig, run_id: Optional[int]) -> RunReport:
        raise NotImplementedError
