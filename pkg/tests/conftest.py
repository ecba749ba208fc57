import numpy as np
import pytest

import psyframe as pf
from psyframe import model as mdl


@pytest.fixture(scope="session")
def filter_spec():
    return pf.design_bandpass(1.0, 50.0, 128.0, 4)


@pytest.fixture(scope="session")
def small_dataset():
    return pf.build_dataset(12, seed=7)


@pytest.fixture(scope="session")
def trained():
    """A quickly trained but already strong model (shared across tests).

    5 epochs at 100 windows/class lands around 0.98 validation accuracy,
    which is plenty for pipeline and service behavior tests. The acceptance
    suite runs the full 30-epoch criterion itself.
    """
    d = pf.build_dataset(100, seed=7)
    d_train, d_val = pf.split_dataset(d, 0.8, seed=0)
    weights, report = pf.train(d_train, d_val, mdl.ModelConfig(), epochs=5, batch_size=16, seed=0)
    return weights, report, d_train, d_val


@pytest.fixture(scope="session")
def trained_weights_path(trained, tmp_path_factory):
    weights, _, _, _ = trained
    path = tmp_path_factory.mktemp("model") / "weights.ndjson"
    mdl.save_weights(path, weights)
    return path


def rng_window(seed: int, scale: float = 10.0) -> pf.EegWindow:
    rng = np.random.default_rng(seed)
    return pf.EegWindow(data=rng.normal(scale=scale, size=(14, 256)))
