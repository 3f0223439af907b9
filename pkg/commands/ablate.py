"""Ablation grid over model variants with matched seeds."""
import logging
from typing import Optional

from config import ExperimentConfig
from utils.errors import ConfigError
from utils.formatting import render_table
from .common import (
    ExperimentCommand, RunReport, aggregate_results, output_dir, run_replications, write_curves, write_summary,
)

logger = logging.getLogger(__name__)


class AblateCommand(ExperimentCommand):
    """Train every requested variant on every replication and tabulate mean±SE per variant."""

    name = "ablate"

    async def execute(self, config: ExperimentConfig, run_id: Optional[int]) -> RunReport:
        variants = list(config.variants)
        if len(variants) < 2:
            raise ConfigError(f"ablate compares at least two variants, got {variants}")
        logger.info(f"Ablating {len(variants)} variants over {config.replications} replications")

        results = await run_replications(config, variants, self.jobs)
        await self.record_results(run_id, results)

        out_dir = output_dir(config, self.name)
        table = aggregate_results(results, variants)
        write_summary(table, out_dir)
        write_curves(results[0].variants[variants[-1]].training, out_dir)
        print(render_table(table, variants))

        return RunReport(
            command=self.name,
            config=config.to_dict(),
            replications=[r.to_dict() for r in results],
            aggregate={v: {scope: report.to_dict() for scope, report in by_scope.items()}
                       for v, by_scope in table.items()},
            extra={"variants": variants},
        )
