import numpy as np
import numpy.testing as npt
import pytest

from data import (
    CausalDataset, SplitSpec, generate_linear_scm, generate_tvaesynth, ihdp_like, jobs_like, load_csv, split,
    split_indices, split_sizes, standardize, write_csv,
)
from data.csv_io import infer_covariate_kinds
from data.preprocessing import invert_standardization
from data.synth import TVAESYNTH_KINDS, tvaesynth_outcome
from utils.errors import ConfigError, ContractError, InputError, ParseError


class TestTvaeSynth:

    def test_outcome_equation(self):
        assert tvaesynth_outcome(1.0, 2.0, 1.0, 0.0) == pytest.approx(1.4)
        assert tvaesynth_outcome(1.0, 2.0, 0.0, 0.0) == pytest.approx(0.2)

    def test_shapes_and_schema(self):
        data = generate_tvaesynth(200, seed=5)
        assert data.x.shape == (200, 8)
        assert data.covariate_kinds == TVAESYNTH_KINDS
        assert data.binary_columns == (0, 3)
        for j in data.binary_columns:
            assert set(np.unique(data.x[:, j])) <= {0.0, 1.0}
        assert set(data.latents) == {"z_o", "z_c", "z_t", "z_y"}
        assert data.outcome_kind == "unbounded_continuous"

    def test_deterministic(self):
        a, b = generate_tvaesynth(100, seed=7), generate_tvaesynth(100, seed=7)
        npt.assert_array_equal(a.x, b.x)
        npt.assert_array_equal(a.y, b.y)
        assert not np.array_equal(a.y, generate_tvaesynth(100, seed=8).y)

    def test_unit_effect_identity(self):
        data = generate_tvaesynth(500, seed=2)
        npt.assert_allclose(data.tau_true, 0.5 * data.latents["z_y"] + 0.2, atol=1e-12)

    def test_factual_outcome_uses_observed_arm(self):
        data = generate_tvaesynth(500, seed=2)
        residual = data.y - np.where(data.t == 1, data.mu1, data.mu0)
        assert np.std(residual) == pytest.approx(0.1, rel=0.15)

    def test_sample_ate(self):
        n = 20000
        data = generate_tvaesynth(n, seed=3)
        assert abs(data.tau_true.mean() - 0.2) < 4 * 0.5 / np.sqrt(n)

    def test_generator_moments(self):
        data = generate_tvaesynth(100000, seed=4)
        # column x4 holds x5: 0.6 z_t + 0.1 U + N(0, 0.1)
        variance = data.x[:, 4].var()
        assert variance == pytest.approx(0.38, abs=4 * 0.38 * np.sqrt(2.0 / data.n))
        assert 0.4 < data.t.mean() < 0.6

    def test_rejects_empty(self):
        with pytest.raises(ConfigError):
            generate_tvaesynth(0, seed=1)


class TestLinearScm:

    def test_unit_effect_is_one(self):
        data = generate_linear_scm(1000, seed=1)
        npt.assert_allclose(data.tau_true, np.ones(1000))
        assert data.m == 1
        assert 0.3 < data.t.mean() < 0.7


class TestFixtures:

    def test_ihdp_shape(self):
        data = ihdp_like(seed=0)
        assert data.x.shape == (747, 25)
        assert len(data.binary_columns) == 19
        assert int(data.t.sum()) == 139
        assert data.has_ground_truth
        treated = data.t == 1
        assert np.mean(data.mu1[treated] - data.mu0[treated]) == pytest.approx(4.0)

    def test_jobs_shape(self):
        data = jobs_like(seed=0)
        assert data.n == 2935
        assert data.rct_flag.sum() == 445
        assert data.t[data.rct_flag].sum() == 260
        assert data.t[~data.rct_flag].sum() == 0
        assert data.outcome_kind == "binary"
        assert not data.has_ground_truth


class TestCausalDataset:

    def test_non_binary_treatment(self):
        with pytest.raises(InputError):
            CausalDataset(x=np.zeros((2, 1)), t=np.array([0.0, 2.0]), y=np.zeros(2), covariate_kinds=("continuous",))

    def test_unpaired_ground_truth(self):
        with pytest.raises(InputError):
            CausalDataset(x=np.zeros((2, 1)), t=np.array([0.0, 1.0]), y=np.zeros(2),
                          covariate_kinds=("continuous",), mu0=np.zeros(2))

    def test_binary_column_values(self):
        with pytest.raises(InputError):
            CausalDataset(x=np.array([[0.5], [1.0]]), t=np.array([0.0, 1.0]), y=np.zeros(2),
                          covariate_kinds=("binary",))

    def test_arrays_are_read_only(self, synth_data):
        with pytest.raises(ValueError):
            synth_data.y[0] = 1.0

    def test_subset_keeps_ground_truth(self, synth_data):
        part = synth_data.subset([0, 5, 9])
        assert part.n == 3
        npt.assert_array_equal(part.mu1, synth_data.mu1[[0, 5, 9]])
        npt.assert_array_equal(part.latents["z_y"], synth_data.latents["z_y"][[0, 5, 9]])


class TestSplit:

    def test_ihdp_sizes(self):
        assert split_sizes(747, SplitSpec((0.6, 0.3, 0.1))) == (449, 224, 74)

    def test_partition(self):
        parts = split_indices(100, SplitSpec((0.6, 0.3, 0.1), seed=4))
        joined = np.concatenate(parts)
        npt.assert_array_equal(np.sort(joined), np.arange(100))

    def test_deterministic(self, synth_data):
        a = split(synth_data, SplitSpec(seed=9))
        b = split(synth_data, SplitSpec(seed=9))
        for left, right in zip(a, b):
            npt.assert_array_equal(left.x, right.x)

    def test_empty_partition(self):
        with pytest.raises(ConfigError):
            split_sizes(5, SplitSpec((0.6, 0.3, 0.1)))

    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ConfigError):
            SplitSpec((0.5, 0.3, 0.1))


class TestStandardize:

    def test_outcome(self, synth_data):
        scaled, record = standardize(synth_data, "outcome")
        assert scaled.y.mean() == pytest.approx(0.0, abs=1e-9)
        assert scaled.y.var() == pytest.approx(1.0, abs=1e-9)
        npt.assert_allclose(invert_standardization(scaled, record).y, synth_data.y, atol=1e-12)
        npt.assert_allclose(invert_standardization(scaled, record).mu1, synth_data.mu1, atol=1e-12)

    def test_continuous_covariates_only(self, synth_data):
        scaled, record = standardize(synth_data, "continuous_covariates")
        assert record.columns == synth_data.continuous_columns
        npt.assert_array_equal(scaled.x[:, 0], synth_data.x[:, 0])
        npt.assert_allclose(scaled.x[:, 1].mean(), 0.0, atol=1e-9)
        npt.assert_allclose(scaled.x[:, 1].var(), 1.0, atol=1e-9)

    def test_reuses_training_record(self, synth_splits):
        train, val, _ = synth_splits
        _, record = standardize(train, "continuous_covariates")
        scaled_val, reused = standardize(val, "continuous_covariates", record)
        assert reused is record
        npt.assert_allclose(scaled_val.x[:, 2], (val.x[:, 2] - record.means[1]) / record.stds[1])

    def test_zero_variance_column_is_skipped(self, caplog):
        data = CausalDataset(x=np.column_stack([np.ones(4), np.arange(4.0)]), t=np.array([0.0, 1.0, 0.0, 1.0]),
                             y=np.arange(4.0), covariate_kinds=("continuous", "continuous"))
        scaled, record = standardize(data, "continuous_covariates")
        assert record.columns == (1,)
        npt.assert_array_equal(scaled.x[:, 0], np.ones(4))
        assert "zero variance" in caplog.text

    def test_binary_outcome_is_rejected(self):
        data = jobs_like(seed=1)
        with pytest.raises(ContractError):
            standardize(data, "outcome")


class TestCsv:

    @pytest.fixture
    def small(self):
        return CausalDataset(
            x=np.array([[0.1, 1.0], [1.0 / 3.0, 0.0], [-2.5e-7, 1.0]]),
            t=np.array([1.0, 0.0, 1.0]),
            y=np.array([0.7, np.pi, -1e10]),
            covariate_kinds=("continuous", "binary"),
            mu0=np.array([0.1, 0.2, 0.3]),
            mu1=np.array([1.1, 1.2, 1.3]),
            rct_flag=np.array([True, False, True]),
        )

    def test_round_trip_is_exact(self, small, tmp_path):
        loaded = load_csv(write_csv(small, tmp_path / "small.csv"))
        npt.assert_array_equal(loaded.x, small.x)
        npt.assert_array_equal(loaded.y, small.y)
        npt.assert_array_equal(loaded.mu0, small.mu0)
        npt.assert_array_equal(loaded.mu1, small.mu1)
        npt.assert_array_equal(loaded.rct_flag, small.rct_flag)
        assert loaded.covariate_kinds == ("continuous", "binary")
        assert loaded.name == "small"

    def test_header_layout(self, small, tmp_path):
        path = write_csv(small, tmp_path / "small.csv")
        assert path.read_text(encoding="utf-8").splitlines()[0] == "t,y,mu0,mu1,e,x0,x1"

    def test_generated_dataset_round_trip(self, tmp_path):
        data = generate_tvaesynth(50, seed=1)
        loaded = load_csv(write_csv(data, tmp_path / "synth.csv"))
        npt.assert_array_equal(loaded.x, data.x)
        npt.assert_array_equal(loaded.tau_true, data.tau_true)
        assert loaded.covariate_kinds == TVAESYNTH_KINDS

    def test_missing_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,x0\n1,0.5\n", encoding="utf-8")
        with pytest.raises(ParseError) as excinfo:
            load_csv(path)
        assert excinfo.value.row == 1
        assert excinfo.value.column == "y"

    def test_non_numeric_cell(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,y,x0\n1,0.5,1.0\n0,abc,2.0\n", encoding="utf-8")
        with pytest.raises(ParseError) as excinfo:
            load_csv(path)
        assert excinfo.value.row == 3
        assert excinfo.value.column == "y"

    def test_non_binary_treatment(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,y,x0\n2,0.5,1.0\n", encoding="utf-8")
        with pytest.raises(ParseError) as excinfo:
            load_csv(path)
        assert excinfo.value.row == 2
        assert excinfo.value.column == "t"

    def test_binary_outcome_is_inferred(self, tmp_path):
        path = tmp_path / "binary.csv"
        path.write_text("t,y,x0\n1,1,0.5\n0,0,1.5\n", encoding="utf-8")
        assert load_csv(path).outcome_kind == "binary"

    def test_infer_covariate_kinds(self):
        x = np.array([[0.0, 0.5], [1.0, 2.0]])
        assert infer_covariate_kinds(x) == ("binary", "continuous")
