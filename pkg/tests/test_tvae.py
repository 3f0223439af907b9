import json

import numpy as np
import numpy.testing as npt
import pytest

from data import generate_tvaesynth, split, SplitSpec
from diffcore import backward, constant
from metrics import evaluate_effects
from tvae import (
    Batch, TvaeConfig, TvaeModel, elbo_loss, estimate_effects, from_preset, load_checkpoint, save_checkpoint,
    targeted_regularizer, total_loss, train, variant_config,
)
from tvae.config import adam_step_size
from tvae.losses import clever_covariate_node, combine_elbo, elbo_terms
from tvae.model import route
from tvae.training import prepare_training_data
from utils.errors import ConfigError, ContractError, DimensionError, InputError, ParseError, TrainingAbortedError
from tests.gradcheck import numeric_gradient


@pytest.fixture
def model(tiny_config, synth_data):
    return TvaeModel(tiny_config, synth_data.covariate_kinds)


@pytest.fixture
def batch(synth_data):
    return Batch.from_arrays(synth_data.x[:40], synth_data.t[:40], synth_data.y[:40])


def _mean_latents(model, x):
    posteriors = model.encode(x)
    return model.sample_latents(posteriors, {f: np.zeros(q.mu.shape) for f, q in posteriors.items()})


class TestConfig:

    def test_presets(self):
        config = from_preset("ihdp")
        assert (config.d_zt, config.d_zy, config.d_zc, config.d_zo) == (10, 10, 15, 5)
        assert config.lambda_tl == 0.4
        assert from_preset("jobs").outcome_kind == "binary"
        assert from_preset("tvaesynth", epochs=3).epochs == 3

    def test_preset_step_sizes(self):
        assert adam_step_size(5e-5, 200) == pytest.approx(1e-2)
        assert from_preset("tvaesynth").lr == pytest.approx(1e-2)
        assert from_preset("ihdp").lr == pytest.approx(1e-2)
        assert from_preset("jobs").lr == pytest.approx(2e-3)

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            from_preset("twins")

    def test_invalid_values(self):
        with pytest.raises(ConfigError):
            TvaeConfig(hidden_layers=0)
        with pytest.raises(ConfigError):
            TvaeConfig(lr=0.0)
        with pytest.raises(ConfigError):
            TvaeConfig.from_dict({"learning_rate": 0.1})

    @pytest.mark.parametrize("variant, d_zc, d_zo, lambda_tl, stop", [
        ("base", 3, 0, 0.0, True),
        ("+z_o*", 3, 1, 0.0, True),
        ("+z_o", 2, 1, 0.0, True),
        ("+ξ", 3, 0, 0.1, True),
        ("+z_o+ξ*", 2, 1, 0.1, False),
        ("+z_o+ξ", 2, 1, 0.1, True),
    ])
    def test_variants(self, variant, d_zc, d_zo, lambda_tl, stop):
        config = variant_config(TvaeConfig(d_zc=2, d_zo=1, lambda_tl=0.1), variant)
        assert (config.d_zc, config.d_zo, config.lambda_tl) == (d_zc, d_zo, lambda_tl)
        assert config.stop_propensity_gradient is stop
        assert config.variant == variant

    def test_unknown_variant(self):
        with pytest.raises(ConfigError):
            variant_config(TvaeConfig(), "+z_x")


class TestModel:

    def test_network_layout(self, model):
        names = set(model.networks())
        assert names == {f"f{i}" for i in range(1, 12)} | {f"h{i}" for i in range(1, 7)}
        assert model.epsilon.shape == ()
        assert float(model.epsilon.value) == 0.0
        assert "epsilon" in model.parameters()

    def test_without_miscellaneous_factor(self, tiny_config, synth_data):
        model = TvaeModel(tiny_config.replace(d_zo=0), synth_data.covariate_kinds)
        assert "f7" not in model.networks() and "f8" not in model.networks()
        latents = _mean_latents(model, synth_data.x[:5])
        assert latents.z_o is None
        mean, logvar, logits = model.decode_covariates(latents)
        assert mean.shape == (5, 6) and logits.shape == (5, 2)

    def test_only_continuous_covariates(self, tiny_config):
        model = TvaeModel(tiny_config, ("continuous",) * 3)
        assert model.h6 is None
        assert model.h4 is not None

    def test_seeded_initialization(self, tiny_config, synth_data):
        a = TvaeModel(tiny_config, synth_data.covariate_kinds).snapshot()
        b = TvaeModel(tiny_config, synth_data.covariate_kinds).snapshot()
        for name in a:
            npt.assert_array_equal(a[name], b[name])

    def test_encode_shapes(self, model, synth_data):
        posteriors = model.encode(synth_data.x[:7])
        assert set(posteriors) == {"z_t", "z_y", "z_c", "z_o"}
        assert all(q.mu.shape == (7, 1) for q in posteriors.values())
        assert all(np.all(q.sigma2.value > 0) for q in posteriors.values())

    def test_zero_weights_give_bias_posterior(self, model, synth_data):
        encoder_layers = tuple(f"f{i}." for i in range(1, 9))
        values = model.snapshot()
        for name in values:
            if name.startswith(encoder_layers) and name.endswith(".W"):
                values[name] = np.zeros_like(values[name])
        values["f3.1.b"] = np.array([0.3])
        values["f4.1.b"] = np.array([-0.5])
        model.restore(values)
        first, second = model.encode(synth_data.x[:4]), model.encode(synth_data.x[4:8])
        npt.assert_allclose(first["z_y"].mu.value, np.full((4, 1), 0.3))
        npt.assert_allclose(first["z_y"].sigma2.value, np.full((4, 1), np.exp(-0.5) + 1e-8))
        for factor in first:
            npt.assert_array_equal(first[factor].mu.value, second[factor].mu.value)
            npt.assert_array_equal(first[factor].sigma2.value, second[factor].sigma2.value)

    def test_encode_rejects_nan(self, model, synth_data):
        x = synth_data.x[:3].copy()
        x[1, 2] = np.nan
        with pytest.raises(InputError):
            model.encode(x)

    def test_encode_rejects_wrong_width(self, model):
        with pytest.raises(DimensionError):
            model.encode(np.zeros((3, 5)))

    def test_restore_checks_shapes(self, model):
        values = model.snapshot()
        values["h1.0.W"] = np.zeros((1, 1))
        with pytest.raises(DimensionError):
            model.restore(values)

    def test_route(self):
        out = route(np.array([[1.0], [0.0]]), constant([[5.0], [5.0]]), constant([[-1.0], [-1.0]]))
        npt.assert_array_equal(out.value, [[5.0], [-1.0]])


class TestObjective:

    def test_clever_covariate_node(self):
        H = clever_covariate_node(np.array([[1.0], [0.0]]), constant([[0.25], [0.75]]))
        npt.assert_allclose(H.value, [[4.0], [-4.0]])

    def test_zero_fluctuation_is_plain_likelihood(self, model, batch):
        latents = _mean_latents(model, batch.x)
        xi = targeted_regularizer(model, batch, latents=latents)
        head1, head0 = model.outcome_heads(latents)
        expected = np.mean((batch.y - route(batch.t, head1, head0).value) ** 2)
        assert xi.item() == pytest.approx(expected, rel=1e-12)

    def test_regularizer_reaches_epsilon(self, model, batch):
        model.epsilon.value = np.array(0.05)
        backward(targeted_regularizer(model, batch, latents=_mean_latents(model, batch.x)))
        assert model.epsilon.grad is not None
        assert float(model.epsilon.grad) != 0.0

    def test_propensity_is_detached(self, model, batch):
        model.epsilon.value = np.array(0.05)
        backward(targeted_regularizer(model, batch, latents=_mean_latents(model, batch.x)))
        assert all(node.grad is None for node in model.network_parameters("h1", "f9").values())
        assert any(node.grad is not None for node in model.network_parameters("h2").values())

    def test_propensity_gradient_when_enabled(self, tiny_config, synth_data, batch):
        model = TvaeModel(tiny_config.replace(stop_propensity_gradient=False), synth_data.covariate_kinds)
        model.epsilon.value = np.array(0.5)
        backward(targeted_regularizer(model, batch, latents=_mean_latents(model, batch.x)))
        grads = [node.grad for node in model.network_parameters("h1").values()]
        assert any(g is not None and np.any(g != 0) for g in grads)

    def test_binary_outcome_regularizer(self, tiny_config):
        rng = np.random.default_rng(0)
        model = TvaeModel(tiny_config.replace(outcome_kind="binary"), ("continuous", "binary"))
        x = np.column_stack([rng.normal(size=20), rng.binomial(1, 0.5, 20)])
        batch = Batch.from_arrays(x, rng.binomial(1, 0.5, 20), rng.binomial(1, 0.5, 20))
        xi = targeted_regularizer(model, batch, rng=rng)
        assert np.isfinite(xi.item()) and xi.item() > 0

    def test_total_loss_parts(self, model, batch, rng):
        parts = total_loss(model, batch, rng)
        assert {"x", "t", "y", "aux_t", "aux_y", "kl", "elbo", "xi", "total"} <= set(parts)
        expected = parts["elbo"].item() + model.config.lambda_tl * parts["xi"].item()
        assert parts["total"].item() == pytest.approx(expected)

    def test_total_loss_without_regularizer(self, tiny_config, synth_data, batch, rng):
        model = TvaeModel(tiny_config.replace(lambda_tl=0.0), synth_data.covariate_kinds)
        parts = total_loss(model, batch, rng)
        assert "xi" not in parts
        assert parts["total"] is parts["elbo"]

    def test_beta_scales_kl(self, model, batch, rng):
        posteriors = model.encode(batch.x)
        latents = model.sample_latents(posteriors, model.draw_noise(posteriors, rng))
        terms = elbo_terms(model, batch, latents, posteriors, rng)
        gap = combine_elbo(terms, 1.0).item() - combine_elbo(terms, 0.0).item()
        assert gap == pytest.approx(terms["kl"].item())
        assert terms["kl"].item() >= 0

    @pytest.mark.parametrize("name", ["f10.1.b", "h4.1.b", "f3.0.W"])
    def test_elbo_gradient(self, model, batch, name):
        node = model.parameters()[name]
        original = node.value.copy()
        backward(elbo_loss(model, batch, np.random.default_rng(5)))
        analytic = node.grad.copy()

        def loss_at(value):
            node.value = value
            return elbo_loss(model, batch, np.random.default_rng(5)).item()

        numeric = numeric_gradient(loss_at, original)
        node.value = original
        npt.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-6)

    def test_total_loss_gradient(self, model, batch):
        # parameters off the sampled-treatment path, so the surrogate gradient is exact
        model.epsilon.value = np.array(0.1)
        params = model.parameters()
        names = ["epsilon", "h2.1.b", "h3.0.W", "h5.1.b", "f11.1.b"]
        backward(total_loss(model, batch, np.random.default_rng(8))["total"])
        for name in names:
            node = params[name]
            original = node.value.copy()

            def loss_at(value):
                node.value = value
                return total_loss(model, batch, np.random.default_rng(8))["total"].item()

            numeric = numeric_gradient(loss_at, original)
            node.value = original
            npt.assert_allclose(node.grad, numeric, rtol=1e-4, atol=1e-6, err_msg=name)


class TestTraining:

    def test_log(self, model, synth_splits):
        train_set, val_set, _ = synth_splits
        model, log = train(model, train_set, val_set)
        assert model.trained
        assert len(log.records) == model.config.epochs
        assert 0 <= log.best_epoch < model.config.epochs
        payload = log.to_dict()
        assert set(payload) == {"best_epoch", "wall_clock_s", "epochs"}
        assert all(np.isfinite(r.val_mean_ic) for r in log.records)
        assert len(log.series("epsilon")) == model.config.epochs

    def test_regularizer_disabled_keeps_epsilon(self, tiny_config, synth_data, synth_splits):
        train_set, val_set, _ = synth_splits
        model = TvaeModel(tiny_config.replace(lambda_tl=0.0), synth_data.covariate_kinds)
        model, log = train(model, train_set, val_set)
        assert float(model.epsilon.value) == 0.0
        assert all(r.train_xi is None for r in log.records)

    def test_regularizer_moves_epsilon(self, model, synth_splits):
        train_set, val_set, _ = synth_splits
        model, log = train(model, train_set, val_set)
        assert any(r.epsilon != 0.0 for r in log.records)

    def test_deterministic(self, tiny_config, synth_data, synth_splits):
        train_set, val_set, _ = synth_splits
        first, _ = train(TvaeModel(tiny_config, synth_data.covariate_kinds), train_set, val_set)
        second, _ = train(TvaeModel(tiny_config, synth_data.covariate_kinds), train_set, val_set)
        a, b = first.snapshot(), second.snapshot()
        for name in a:
            npt.assert_array_equal(a[name], b[name])

    def test_standardization_fitted_on_train(self, model, synth_splits):
        train_set, val_set, _ = synth_splits
        train_batch, _ = prepare_training_data(model, train_set, val_set)
        assert train_batch.y.mean() == pytest.approx(0.0, abs=1e-9)
        assert model.covariate_transform.columns == train_set.continuous_columns

    def test_outcome_kind_mismatch(self, model, synth_splits):
        train_set, val_set, _ = synth_splits
        with pytest.raises(ContractError):
            train(model, train_set.replace(outcome_kind="bounded_continuous"), val_set)

    def test_settings_come_from_model(self, tiny_config, synth_data, synth_splits):
        train_set, val_set, _ = synth_splits
        model = TvaeModel(tiny_config.replace(epochs=3), synth_data.covariate_kinds)
        _, log = train(model, train_set, val_set)
        assert len(log.records) == 3
        with pytest.raises(TypeError):
            train(model, train_set, val_set, config=tiny_config)

    def test_trained_posterior_follows_covariates(self, model, synth_data, synth_splits):
        train_set, val_set, _ = synth_splits
        model, _ = train(model, train_set, val_set)
        x = model.standardize_covariates(synth_data.x[:2])
        posteriors = model.encode(x)
        for factor, q in posteriors.items():
            assert not np.allclose(q.mu.value[0], q.mu.value[1]), factor

    def test_non_finite_loss_aborts(self, model, synth_splits, monkeypatch):
        import tvae.training

        real_total_loss = tvae.training.total_loss

        def poisoned(model, batch, rng):
            parts = real_total_loss(model, batch, rng)
            parts["kl"] = constant(np.nan)
            return parts

        monkeypatch.setattr(tvae.training, "total_loss", poisoned)
        train_set, val_set, _ = synth_splits
        with pytest.raises(TrainingAbortedError) as excinfo:
            train(model, train_set, val_set)
        assert excinfo.value.epoch == 0
        assert excinfo.value.term == "kl"


class TestEffects:

    @pytest.fixture
    def trained(self, model, synth_splits):
        train_set, val_set, _ = synth_splits
        return train(model, train_set, val_set)[0]

    def test_untrained_model(self, model, synth_data):
        with pytest.raises(ContractError):
            estimate_effects(model, synth_data.x, t=synth_data.t)

    def test_observed_treatments_required(self, trained, synth_data):
        with pytest.raises(ContractError):
            estimate_effects(trained, synth_data.x)

    def test_identical_heads(self, model, synth_data):
        values = model.snapshot()
        for name in list(values):
            if name.startswith("h2."):
                values["h3." + name[3:]] = values[name]
        model.restore(values)
        model.trained = True
        estimates = estimate_effects(model, synth_data.x, t=synth_data.t)
        npt.assert_array_equal(estimates.tau_hat, np.zeros(synth_data.n))
        assert estimates.ate_hat == 0.0

    def test_factual_prediction_follows_treatment(self, trained, synth_data):
        estimates = estimate_effects(trained, synth_data.x, t=synth_data.t)
        npt.assert_array_equal(estimates.y_hat, np.where(synth_data.t == 1, estimates.q1, estimates.q0))
        sampled = estimate_effects(trained, synth_data.x, t_source="sampled")
        assert sampled.y_hat.shape == (synth_data.n,)

    def test_unit_estimates_do_not_depend_on_batch(self, trained, synth_data):
        full = estimate_effects(trained, synth_data.x, t=synth_data.t)
        alone = estimate_effects(trained, synth_data.x[3:4], t=synth_data.t[3:4])
        npt.assert_allclose(alone.tau_hat[0], full.tau_hat[3], rtol=1e-10)

    def test_monte_carlo_variance_shrinks(self, trained, synth_data):
        x = synth_data.x[:50]

        def spread(n_samples):
            ates = [estimate_effects(trained, x, t_source="sampled", n_samples=n_samples, seed=s).ate_hat
                    for s in range(8)]
            return np.var(ates)

        assert spread(1000) < spread(10)

    def test_metrics_from_estimates(self, trained, synth_data):
        estimates = estimate_effects(trained, synth_data.x, t=synth_data.t)
        report = evaluate_effects(synth_data, estimates.q1, estimates.q0, "within_sample")
        assert report.pehe >= 0 and report.eate >= 0


class TestCheckpoint:

    def test_round_trip(self, model, synth_data, synth_splits, tmp_path):
        train_set, val_set, _ = synth_splits
        model, _ = train(model, train_set, val_set)
        loaded = load_checkpoint(save_checkpoint(model, tmp_path / "ckpt" / "model.json"))
        assert loaded.trained
        assert loaded.config == model.config
        before = estimate_effects(model, synth_data.x, t=synth_data.t)
        after = estimate_effects(loaded, synth_data.x, t=synth_data.t)
        npt.assert_array_equal(before.q1, after.q1)
        npt.assert_array_equal(before.q0, after.q0)

    def test_wrong_version(self, model, tmp_path):
        path = save_checkpoint(model, tmp_path / "model.json")
        payload = json.loads(path.read_text(encoding="utf-8"))
        payload["format_version"] = 99
        path.write_text(json.dumps(payload), encoding="utf-8")
        with pytest.raises(ParseError):
            load_checkpoint(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ParseError):
            load_checkpoint(path)


@pytest.mark.slow
class TestTvaeSynthPresetTraining:

    def test_loss_trends_down(self):
        data = generate_tvaesynth(2000, seed=0)
        train_set, val_set, _ = split(data, SplitSpec((0.6, 0.3, 0.1), seed=0))
        config = from_preset("tvaesynth", seed=0)
        _, log = train(TvaeModel(config, data.covariate_kinds), train_set, val_set)
        losses = np.array(log.series("train_loss"))
        assert len(losses) == 40
        block_means = losses.reshape(4, 10).mean(axis=1)
        assert block_means[0] > block_means[-1]
        assert np.polyfit(np.arange(40), losses, 1)[0] < 0
