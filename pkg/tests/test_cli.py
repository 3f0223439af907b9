import asyncio
import io
import json

import numpy as np
import pandas as pd
import pytest
from PIL import Image

from commands.common import aggregate_results, run_replications
from config import ExperimentConfig, experiment_config_from_dict, load_experiment_config
from database import ResultsDatabase
from data import load_csv
from main import exit_code_for, main
from metrics import MetricsReport
from utils.constants import ABLATION_VARIANTS, FULL_MODEL_VARIANT
from utils.errors import (
    ConfigError, ContractError, ConvergenceError, DegenerateDataError, DimensionError, InputError, OptimizerError,
    ParseError, TrainingAbortedError,
)
from utils.formatting import format_mean_se, render_table, summary_frame
from utils.image_generator import generate_training_curves

TINY_MODEL = {
    "preset": "tvaesynth", "d_zt": 1, "d_zy": 1, "d_zc": 1, "d_zo": 1, "hidden_neurons": 8,
    "hidden_layers": 1, "lr": 1e-3, "lr_decay": 0.0, "batch_size": 50, "epochs": 2, "n_effect_samples": 5,
}


def _write_config(path, **blocks):
    payload = {"schema_version": 1, "seed": 4, "dataset": {"source": "tvaesynth", "n": 200}, "model": TINY_MODEL}
    payload.update(blocks)
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def _run(*argv):
    return asyncio.run(main(list(argv)))


class TestExperimentConfig:

    def test_defaults(self):
        config = load_experiment_config()
        assert isinstance(config, ExperimentConfig)
        assert config.dataset.source == "tvaesynth"
        assert config.dataset.n == 2000
        assert config.model.lambda_tl == pytest.approx(0.1)

    def test_dataset_defaults_follow_source(self):
        config = experiment_config_from_dict({"dataset": {"source": "jobs_like"}})
        assert config.dataset.split == (0.56, 0.24, 0.2)
        assert config.model.outcome_kind == "binary"

    def test_unknown_nested_key(self):
        with pytest.raises(ConfigError, match="dataset.foo"):
            experiment_config_from_dict({"dataset": {"foo": 1}})

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="learning_rate"):
            experiment_config_from_dict({"learning_rate": 0.1})

    def test_csv_needs_path(self):
        with pytest.raises(ConfigError):
            experiment_config_from_dict({"dataset": {"source": "csv"}})

    def test_schema_version(self):
        with pytest.raises(ConfigError):
            experiment_config_from_dict({"schema_version": 2})

    def test_split_must_sum_to_one(self):
        with pytest.raises(ConfigError):
            experiment_config_from_dict({"dataset": {"split": [0.5, 0.5, 0.5]}})

    def test_repeated_variant(self):
        with pytest.raises(ConfigError):
            experiment_config_from_dict({"ablation": {"variants": ["base", "base"]}})

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_experiment_config(path)

    def test_echo_round_trip(self, tmp_path):
        config = load_experiment_config(_write_config(tmp_path / "c.json"))
        assert experiment_config_from_dict(config.to_dict()) == config


class TestExitCodes:

    @pytest.mark.parametrize("error, code", [
        (ConfigError("bad"), 2),
        (ParseError("bad", row=3), 2),
        (DegenerateDataError("one arm"), 2),
        (TrainingAbortedError(1, "kl"), 3),
        (OptimizerError("h1.0.W"), 3),
        (ConvergenceError("slow"), 3),
        (ContractError("schema mismatch"), 2),
        (InputError("NaN covariates"), 2),
        (DimensionError("bad shape"), 1),
    ])
    def test_mapping(self, error, code):
        assert exit_code_for(error) == code


class TestFormatting:

    def test_mean_se(self):
        assert format_mean_se(0.15, 0.003) == "0.150±0.003"
        assert format_mean_se(0.15, None) == "0.150"
        assert format_mean_se(None, 0.1) == "-"

    def test_table_skips_empty_columns(self):
        table = {"base": {"within_sample": MetricsReport("within_sample", pehe=0.15, standard_errors={"pehe": 0.003})}}
        lines = render_table(table).splitlines()
        assert lines[0].split() == ["variant", "sqrt(PEHE)", "(in)"]
        assert lines[1].split() == ["base", "0.150±0.003"]
        assert "eATE" not in lines[0]

    def test_row_order(self):
        table = {name: {"out_of_sample": MetricsReport("out_of_sample", eate=0.1)} for name in ("base", "+ξ")}
        lines = render_table(table, ["+ξ", "base"]).splitlines()
        assert [line.split()[0] for line in lines[1:]] == ["+ξ", "base"]

    def test_summary_frame(self):
        table = {"base": {"within_sample": MetricsReport("within_sample", eate=0.1, n_replications=3)}}
        frame = summary_frame(table)
        assert list(frame["variant"]) == ["base"]
        assert frame.loc[0, "n_replications"] == 3
        assert frame.loc[0, "eate"] == pytest.approx(0.1)


class TestTrainingCurves:

    def test_png(self):
        buffer = generate_training_curves({"train_loss": [3.0, 2.0, 1.0], "val_loss": [3.0, 2.5, 2.0],
                                           "epsilon": [0.0, 0.01, None]}, best_epoch=2)
        assert buffer.getvalue()[:8] == b"\x89PNG\r\n\x1a\n"
        image = Image.open(io.BytesIO(buffer.getvalue()))
        assert image.size == (420, 2 * 260)

    def test_empty_log(self):
        image = Image.open(generate_training_curves({}))
        assert image.size == (420, 100)


class TestGenerateCommand:

    def test_deterministic_output(self, tmp_path):
        config = _write_config(tmp_path / "c.json")
        assert _run("generate", "--config", config, "--out", str(tmp_path / "a"), "--results-db", "") == 0
        assert _run("generate", "--config", config, "--out", str(tmp_path / "b"), "--results-db", "") == 0
        first = (tmp_path / "a" / "tvaesynth.csv").read_bytes()
        assert first == (tmp_path / "b" / "tvaesynth.csv").read_bytes()

        data = load_csv(tmp_path / "a" / "tvaesynth.csv")
        assert data.n == 200
        assert data.has_ground_truth
        report = json.loads((tmp_path / "a" / "report.json").read_text(encoding="utf-8"))
        assert report["command"] == "generate"
        assert report["dataset"]["summary"]["n"] == 200

    def test_seed_override(self, tmp_path):
        config = _write_config(tmp_path / "c.json")
        _run("generate", "--config", config, "--out", str(tmp_path / "a"), "--results-db", "")
        _run("generate", "--config", config, "--seed", "5", "--out", str(tmp_path / "b"), "--results-db", "")
        assert (tmp_path / "a" / "tvaesynth.csv").read_bytes() != (tmp_path / "b" / "tvaesynth.csv").read_bytes()


class TestExperimentCommands:

    def test_train_then_evaluate(self, tmp_path):
        config = _write_config(tmp_path / "c.json", replications=2)
        db_path = str(tmp_path / "results.db")
        out = tmp_path / "train"
        assert _run("train", "--config", config, "--out", str(out), "--results-db", db_path) == 0
        for name in ("report.json", "summary.csv", "checkpoint.json", "training_curves.png"):
            assert (out / name).exists()

        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert [r["replication"] for r in report["replications"]] == [0, 1]
        summary = pd.read_csv(out / "summary.csv")
        assert list(summary["scope"]) == ["within_sample", "out_of_sample"]
        assert (summary["n_replications"] == 2).all()

        db = ResultsDatabase(db_path)
        runs = asyncio.run(db.get_all_runs())
        assert runs[0].status == "finished"
        assert len(asyncio.run(db.get_replication_metrics(runs[0].run_id))) == 4

        evaluated = tmp_path / "evaluate"
        assert _run("evaluate", "--config", config, "--checkpoint", str(out / "checkpoint.json"),
                    "--out", str(evaluated), "--results-db", "") == 0
        assert (evaluated / "summary.csv").exists()

        other_schema = _write_config(tmp_path / "linear.json", dataset={"source": "linear", "n": 200})
        assert _run("evaluate", "--config", other_schema, "--checkpoint", str(out / "checkpoint.json"),
                    "--out", str(tmp_path / "mismatch"), "--results-db", "") == 2

    def test_evaluate_rejects_broken_checkpoint(self, tmp_path):
        broken = tmp_path / "checkpoint.json"
        broken.write_text('{"format_version": 0}', encoding="utf-8")
        code = _run("evaluate", "--config", _write_config(tmp_path / "c.json"), "--checkpoint", str(broken),
                    "--out", str(tmp_path / "out"), "--results-db", "")
        assert code == 2

    def test_ablate(self, tmp_path):
        config = _write_config(tmp_path / "c.json", ablation={"variants": ["base", "+z_o+ξ"]})
        out = tmp_path / "ablate"
        assert _run("ablate", "--config", config, "--out", str(out), "--results-db", "") == 0
        summary = pd.read_csv(out / "summary.csv")
        assert list(summary["variant"]) == ["base", "base", "+z_o+ξ", "+z_o+ξ"]
        assert (out / "training_curves.png").exists()

    def test_ablate_needs_two_variants(self, tmp_path):
        config = _write_config(tmp_path / "c.json", ablation={"variants": ["base"]})
        assert _run("ablate", "--config", config, "--out", str(tmp_path / "out"), "--results-db", "") == 2

    def test_tmle(self, tmp_path):
        config = _write_config(tmp_path / "c.json", dataset={"source": "linear", "n": 2000})
        out = tmp_path / "tmle"
        assert _run("tmle", "--config", config, "--out", str(out), "--results-db", "") == 0
        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        estimate = report["estimates"][0]
        assert abs(estimate["mean_ic"]) <= 1e-6
        assert abs(estimate["ate"] - 1.0) < 4 * estimate["se"]

    def test_config_error_exit_code(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"dataset": {"foo": 1}}), encoding="utf-8")
        assert _run("train", "--config", str(path), "--out", str(tmp_path / "out"), "--results-db", "") == 2

    def test_negative_seed(self, tmp_path):
        config = _write_config(tmp_path / "c.json")
        assert _run("generate", "--config", config, "--seed", "-1", "--out", str(tmp_path), "--results-db", "") == 2


@pytest.mark.slow
class TestTvaeSynthReplications:
    """Twenty matched-seed replications of every variant with the tvaesynth preset."""

    @pytest.fixture(scope="class")
    def table(self):
        config = experiment_config_from_dict({
            "seed": 0, "replications": 20, "dataset": {"source": "tvaesynth", "n": 2000},
            "ablation": {"variants": list(ABLATION_VARIANTS)},
        })
        results = asyncio.run(run_replications(config, config.variants, jobs=4))
        table = aggregate_results(results, config.variants)
        return {variant: by_scope["out_of_sample"] for variant, by_scope in table.items()}

    def test_full_model_accuracy(self, table):
        full = table[FULL_MODEL_VARIANT]
        assert full.n_replications == 20
        assert full.pehe <= 0.18
        assert full.eate <= 0.10

    @pytest.mark.parametrize("metric", ["pehe", "eate"])
    def test_variant_ordering(self, table, metric):
        assert table["+z_o+ξ"].value(metric) <= table["+z_o"].value(metric) <= table["base"].value(metric)

    def test_miscellaneous_factor_beats_extra_capacity(self, table):
        assert table["+z_o"].eate < table["+z_o*"].eate

    def test_propensity_stop_matches_full_backpropagation(self, table):
        stopped, full = table["+z_o+ξ"], table["+z_o+ξ*"]
        pooled_se = np.hypot(stopped.se("pehe"), full.se("pehe"))
        assert abs(stopped.pehe - full.pehe) < 2 * pooled_se
