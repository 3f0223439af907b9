"""Dataset generation command."""
import logging
from typing import Optional

from config import ExperimentConfig
from data import write_csv
from .common import ExperimentCommand, RunReport, build_dataset, output_dir

logger = logging.getLogger(__name__)


class GenerateCommand(ExperimentCommand):
    """Write the configured dataset to CSV and print its summary statistics."""

    name = "generate"

    async def execute(self, config: ExperimentConfig, run_id: Optional[int]) -> RunReport:
        data = build_dataset(config, config.seed)
        path = write_csv(data, output_dir(config, self.name) / f"{data.name}.csv")
        summary = data.summary()

        print(f"Wrote {data.n} units with {data.m} covariates to {path}")
        for key, value in summary.items():
            print(f"  {key:<18} {value}")
        logger.info(f"Generated {config.dataset.source} dataset (seed {config.seed}) at {path}")

        return RunReport(command=self.name, config=config.to_dict(),
                         extra={"dataset": {"path": str(path), "name": data.name, "summary": summary}})
