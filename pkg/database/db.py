"""Database connection and query functions."""
import aiosqlite
import logging
from pathlib import Path
from typing import List, Optional, Sequence

from metrics.report import MetricsReport
from .models import ReplicationMetric, RunRecord

logger = logging.getLogger(__name__)


def _run_from_row(row) -> RunRecord:
    return RunRecord(
        run_id=row['run_id'],
        command=row['command'],
        dataset=row['dataset'],
        seed=row['seed'],
        replications=row['replications'],
        output_dir=row['output_dir'],
        config_json=row['config_json'],
        status=row['status'],
        created_at=row['created_at'],
        finished_at=row['finished_at'],
        wall_clock_s=row['wall_clock_s']
    )


class ResultsDatabase:
    """SQLite store of runs and their per-replication metrics."""

    def __init__(self, db_path: str):
        """Initialize database manager.

        Args:
            db_path: Path to the SQLite database file
        """
        self.db_path = db_path
        self.initialized = False

    async def initialize(self):
        """Initialize the database by creating tables if they don't exist."""
        db_dir = Path(self.db_path).parent
        db_dir.mkdir(parents=True, exist_ok=True)

        init_sql_path = Path(__file__).parent / "init.sql"
        with open(init_sql_path, 'r') as f:
            init_sql = f.read()

        async with aiosqlite.connect(self.db_path) as db:
            await db.executescript(init_sql)
            await db.commit()

        self.initialized = True
        logger.info(f"Database initialized at {self.db_path}")

    async def add_run(self, command: str, dataset: str, seed: int, replications: int,
                      output_dir: str, config_json: str) -> int:
        """Register a new run.

        Returns:
            The new run ID
        """
        async with aiosqlite.connect(self.db_path) as db:
            cursor = await db.execute(
                """INSERT INTO runs (command, dataset, seed, replications, output_dir, config_json)
                   VALUES (?, ?, ?, ?, ?, ?)""",
                (command, dataset, seed, replications, output_dir, config_json)
            )
            await db.commit()
            logger.debug(f"Registered run {cursor.lastrowid} ({command} on {dataset})")
            return cursor.lastrowid

    async def finish_run(self, run_id: int, status: str = "finished", wall_clock_s: Optional[float] = None):
        """Mark a run as finished or failed."""
        async with aiosqlite.connect(self.db_path) as db:
            await db.execute(
                "UPDATE runs SET status = ?, finished_at = CURRENT_TIMESTAMP, wall_clock_s = ? WHERE run_id = ?",
                (status, wall_clock_s, run_id)
            )
            await db.commit()

    async def add_replication_metrics(self, run_id: int, replication: int, variant: str,
                                      reports: Sequence[MetricsReport], epsilon: Optional[float] = None) -> int:
        """Store one replication's reports (one row per scope).

        Rewriting the same (run, replication, variant, scope) replaces the earlier row.

        Returns:
            Number of rows written
        """
        async with aiosqlite.connect(self.db_path) as db:
            for report in reports:
                await db.execute(
                    """INSERT OR REPLACE INTO replication_metrics
                       (run_id, replication, variant, scope, eate, pehe, eatt, policy_risk, epsilon)
                       VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)""",
                    (run_id, replication, variant, report.scope,
                     report.eate, report.pehe, report.eatt, report.policy_risk, epsilon)
                )
            await db.commit()
        return len(reports)

    async def get_run(self, run_id: int) -> Optional[RunRecord]:
        """Get a run by ID.

        Returns:
            RunRecord if found, None otherwise
        """
        async with aiosqlite.connect(self.db_path) as db:
            db.row_factory = aiosqlite.Row
            async with db.execute("SELECT * FROM runs WHERE run_id = ?", (run_id,)) as cursor:
                row = await cursor.fetchone()
                if row:
                    return _run_from_row(row)
        return None

    async def get_all_runs(self) -> List[RunRecord]:
        """Get all runs, newest first."""
        async with aiosqlite.connect(self.db_path) as db:
            db.row_factory = aiosqlite.Row
            async with db.execute("SELECT * FROM runs ORDER BY run_id DESC") as cursor:
                rows = await cursor.fetchall()
                return [_run_from_row(row) for row in rows]

    async def get_replication_metrics(self, run_id: int, variant: Optional[str] = None) -> List[ReplicationMetric]:
        """Get the stored metric rows of a run, ordered by variant, replication and scope."""
        query = "SELECT * FROM replication_metrics WHERE run_id = ?"
        params: tuple = (run_id,)
        if variant is not None:
            query += " AND variant = ?"
            params += (variant,)
        query += " ORDER BY variant, replication, scope"

        async with aiosqlite.connect(self.db_path) as db:
            db.row_factory = aiosqlite.Row
            async with db.execute(query, params) as cursor:
                rows = await cursor.fetchall()
                return [
                    ReplicationMetric(
                        metric_id=row['metric_id'],
                        run_id=row['run_id'],
                        replication=row['replication'],
                        variant=row['variant'],
                        scope=row['scope'],
                        eate=row['eate'],
                        pehe=row['pehe'],
                        eatt=row['eatt'],
                        policy_risk=row['policy_risk'],
                        epsilon=row['epsilon']
                    )
                    for row in rows
                ]
