import asyncio

import pytest

from database import ResultsDatabase
from metrics import MetricsReport


@pytest.fixture
def db(tmp_path):
    database = ResultsDatabase(str(tmp_path / "store" / "results.db"))
    asyncio.run(database.initialize())
    return database


def _reports(pehe_in, pehe_out):
    return [MetricsReport("within_sample", eate=0.01, pehe=pehe_in),
            MetricsReport("out_of_sample", eate=0.02, pehe=pehe_out)]


class TestRuns:

    def test_initialize_creates_directory(self, db, tmp_path):
        assert db.initialized
        assert (tmp_path / "store" / "results.db").exists()

    def test_initialize_is_idempotent(self, db):
        asyncio.run(db.initialize())
        assert asyncio.run(db.get_all_runs()) == []

    def test_add_and_get(self, db):
        run_id = asyncio.run(db.add_run("train", "tvaesynth", 3, 2, "runs/a", '{"seed": 3}'))
        run = asyncio.run(db.get_run(run_id))
        assert run.command == "train"
        assert run.seed == 3
        assert run.replications == 2
        assert run.status == "running"
        assert run.finished_at is None

    def test_missing_run(self, db):
        assert asyncio.run(db.get_run(42)) is None

    def test_finish(self, db):
        run_id = asyncio.run(db.add_run("tmle", "linear", 0, 1, "runs/b", "{}"))
        asyncio.run(db.finish_run(run_id, "failed", 1.5))
        run = asyncio.run(db.get_run(run_id))
        assert run.status == "failed"
        assert run.wall_clock_s == pytest.approx(1.5)
        assert run.finished_at is not None

    def test_newest_first(self, db):
        first = asyncio.run(db.add_run("train", "tvaesynth", 0, 1, "runs/a", "{}"))
        second = asyncio.run(db.add_run("ablate", "ihdp_like", 0, 1, "runs/b", "{}"))
        assert [run.run_id for run in asyncio.run(db.get_all_runs())] == [second, first]


class TestReplicationMetrics:

    def test_one_row_per_scope(self, db):
        run_id = asyncio.run(db.add_run("ablate", "tvaesynth", 0, 2, "runs/a", "{}"))
        written = asyncio.run(db.add_replication_metrics(run_id, 0, "base", _reports(0.2, 0.3), epsilon=0.0))
        assert written == 2
        rows = asyncio.run(db.get_replication_metrics(run_id))
        assert [row.scope for row in rows] == ["out_of_sample", "within_sample"]
        assert rows[1].pehe == pytest.approx(0.2)
        assert rows[0].eatt is None

    def test_rewrite_replaces_row(self, db):
        run_id = asyncio.run(db.add_run("train", "tvaesynth", 0, 1, "runs/a", "{}"))
        asyncio.run(db.add_replication_metrics(run_id, 0, "+z_o+ξ", _reports(0.2, 0.3), epsilon=0.01))
        asyncio.run(db.add_replication_metrics(run_id, 0, "+z_o+ξ", _reports(0.15, 0.25), epsilon=0.02))
        rows = asyncio.run(db.get_replication_metrics(run_id))
        assert len(rows) == 2
        assert sorted(row.pehe for row in rows) == pytest.approx([0.15, 0.25])
        assert all(row.epsilon == pytest.approx(0.02) for row in rows)

    def test_filter_and_order(self, db):
        run_id = asyncio.run(db.add_run("ablate", "tvaesynth", 0, 2, "runs/a", "{}"))
        for replication in (1, 0):
            for variant in ("base", "+ξ"):
                asyncio.run(db.add_replication_metrics(run_id, replication, variant, _reports(0.2, 0.3)))
        base = asyncio.run(db.get_replication_metrics(run_id, variant="base"))
        assert [(row.replication, row.scope) for row in base] == [
            (0, "out_of_sample"), (0, "within_sample"), (1, "out_of_sample"), (1, "within_sample"),
        ]
        assert len(asyncio.run(db.get_replication_metrics(run_id))) == 8

    def test_runs_are_separate(self, db):
        a = asyncio.run(db.add_run("train", "tvaesynth", 0, 1, "runs/a", "{}"))
        b = asyncio.run(db.add_run("train", "tvaesynth", 1, 1, "runs/b", "{}"))
        asyncio.run(db.add_replication_metrics(a, 0, "base", _reports(0.2, 0.3)))
        assert asyncio.run(db.get_replication_metrics(b)) == []
