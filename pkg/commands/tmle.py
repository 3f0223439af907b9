"""Targeted maximum likelihood baseline command."""
import logging
from typing import Optional

import numpy as np

from config import ExperimentConfig
from metrics import MetricsReport, aggregate
from tmle import run_tmle
from utils.errors import ConvergenceError
from utils.formatting import render_table, render_tmle_summary
from .common import (
    ExperimentCommand, ReplicationResult, RunReport, VariantResult, build_dataset, output_dir, replication_seed,
    write_summary,
)

logger = logging.getLogger(__name__)

# Largest mean influence curve accepted after fluctuation
MEAN_IC_TOL = 1e-6
TMLE_ROW = "tmle"


class TmleCommand(ExperimentCommand):
    """Run TMLE on each replication's full dataset."""

    name = "tmle"

    async def execute(self, config: ExperimentConfig, run_id: Optional[int]) -> RunReport:
        settings = config.tmle
        results, estimates = [], []
        for replication in range(config.replications):
            seed = replication_seed(config, replication)
            data = build_dataset(config, seed)
            estimate = run_tmle(data, settings.learner_kind, settings.propensity_learner_kind,
                                settings.tol, settings.max_iter, seed)
            if abs(estimate.mean_ic) > MEAN_IC_TOL:
                raise ConvergenceError(f"mean influence curve {estimate.mean_ic:.3e} exceeds {MEAN_IC_TOL} "
                                       f"on replication {replication}")

            report = MetricsReport(scope="within_sample")
            if data.has_ground_truth:
                report.eate = float(abs(estimate.ate - np.mean(data.tau_true)))
            result = ReplicationResult(replication=replication, seed=seed)
            result.variants[TMLE_ROW] = VariantResult(variant=TMLE_ROW, reports={"within_sample": report},
                                                      training={}, epsilon=estimate.epsilon_hat, ate_hat=estimate.ate)
            results.append(result)
            estimates.append({"replication": replication, "seed": seed, **estimate.summary(), "eate": report.eate})
            print(f"Replication {replication} (seed {seed})")
            print(render_tmle_summary(estimate.summary(), report.eate))
        await self.record_results(run_id, results)

        table = {TMLE_ROW: {"within_sample": aggregate([r.variants[TMLE_ROW].reports["within_sample"]
                                                       for r in results])}}
        write_summary(table, output_dir(config, self.name))
        if config.replications > 1:
            print(render_table(table))

        return RunReport(
            command=self.name,
            config=config.to_dict(),
            replications=[r.to_dict() for r in results],
            aggregate={TMLE_ROW: {"within_sample": table[TMLE_ROW]["within_sample"].to_dict()}},
            extra={"estimates": estimates},
        )
