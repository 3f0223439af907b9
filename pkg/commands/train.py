"""Training and evaluation commands."""
import logging
from pathlib import Path
from typing import Optional, Union

from config import ExperimentConfig
from metrics import aggregate
from tvae import estimate_effects, load_checkpoint, write_payload
from utils.errors import ConfigError, ContractError
from utils.formatting import render_table
from .common import (
    CHECKPOINT_FILE, ExperimentCommand, ReplicationResult, RunReport, VariantResult, aggregate_results,
    build_dataset, output_dir, run_replications, scope_datasets, score_model, write_curves, write_summary,
)

logger = logging.getLogger(__name__)


class TrainCommand(ExperimentCommand):
    """Train the configured variant on every replication and score both scopes."""

    name = "train"

    async def execute(self, config: ExperimentConfig, run_id: Optional[int]) -> RunReport:
        variant = config.model.variant
        results = await run_replications(config, [variant], self.jobs, keep_first_checkpoint=True)
        await self.record_results(run_id, results)

        out_dir = output_dir(config, self.name)
        first = results[0].variants[variant]
        write_payload(first.checkpoint, out_dir / CHECKPOINT_FILE)
        write_curves(first.training, out_dir)

        table = aggregate_results(results, [variant])
        write_summary(table, out_dir)
        print(render_table(table))

        return RunReport(
            command=self.name,
            config=config.to_dict(),
            replications=[r.to_dict() for r in results],
            aggregate={v: {scope: report.to_dict() for scope, report in by_scope.items()}
                       for v, by_scope in table.items()},
            extra={"checkpoint": str(out_dir / CHECKPOINT_FILE)},
        )


class EvaluateCommand(ExperimentCommand):
    """Re-score a saved checkpoint on the configured dataset and split."""

    name = "evaluate"

    def __init__(self, db=None, jobs: int = 1, checkpoint: Optional[Union[str, Path]] = None):
        super().__init__(db, jobs)
        self.checkpoint = checkpoint

    async def execute(self, config: ExperimentConfig, run_id: Optional[int]) -> RunReport:
        if not self.checkpoint:
            raise ConfigError("evaluate needs --checkpoint")
        model = load_checkpoint(self.checkpoint)
        data = build_dataset(config, config.seed)
        if tuple(data.covariate_kinds) != model.covariate_kinds:
            raise ContractError("dataset covariate schema differs from the checkpoint's")

        subsets = scope_datasets(data, config, config.seed)
        reports = score_model(model, subsets, config, config.seed)
        ate_hat = estimate_effects(model, data.x, t_source=config.evaluation.t_source, t=data.t,
                                   seed=config.seed).ate_hat
        variant = model.config.variant
        result = ReplicationResult(replication=0, seed=config.seed)
        result.variants[variant] = VariantResult(variant=variant, reports=reports, training={},
                                                 epsilon=float(model.epsilon.value), ate_hat=ate_hat)
        await self.record_results(run_id, [result])

        table = {variant: {scope: aggregate([report]) for scope, report in reports.items()}}
        write_summary(table, output_dir(config, self.name))
        print(render_table(table))

        return RunReport(
            command=self.name,
            config=config.to_dict(),
            replications=[result.to_dict()],
            aggregate={variant: {scope: report.to_dict() for scope, report in table[variant].items()}},
            extra={"checkpoint": str(self.checkpoint)},
        )
