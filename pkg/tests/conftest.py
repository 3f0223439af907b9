import numpy as np
import pytest

from data import generate_tvaesynth, split, SplitSpec
from tvae.config import TvaeConfig


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the training-heavy acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def synth_data():
    return generate_tvaesynth(300, seed=11)


@pytest.fixture
def synth_splits(synth_data):
    return split(synth_data, SplitSpec((0.6, 0.3, 0.1), seed=11))


@pytest.fixture
def tiny_config():
    return TvaeConfig(d_zt=1, d_zy=1, d_zc=1, d_zo=1, hidden_neurons=8, hidden_layers=1,
                      lr=1e-3, lr_decay=0.0, batch_size=50, epochs=2, n_effect_samples=5, seed=3)
