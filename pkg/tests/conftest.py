import numpy as np
import pytest

from tcfg.model import Architecture, ScoreModel
from tcfg.schedule import linear_beta_schedule


@pytest.fixture(scope="session")
def sched():
    return linear_beta_schedule(100, 1e-4, 0.02)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_model(seed=0, arch=None, scale=0.3):
    """Model with every parameter random (the default init zeroes the output layer)."""
    model = ScoreModel.initialize(arch or Architecture(), seed)
    r = np.random.default_rng(seed + 10_000)
    for name, p in model.params.items():
        p[...] = scale * r.standard_normal(p.shape)
    return model


@pytest.fixture(scope="session")
def trained(sched):
    """Default-config model trained on the default dataset (seed 0) and its loss history."""
    from tcfg.dataset import TwoMoonsSpec, two_moons
    from tcfg.model import TrainConfig, train

    data = two_moons(TwoMoonsSpec())
    model = ScoreModel.initialize(Architecture(), 0)
    _, history = train(model, data, sched, TrainConfig())
    return model, history, data
