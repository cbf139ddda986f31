from dataclasses import replace

import numpy as np
import pytest

from Common import ModelFamily, NoiseConfig, config
from Models import build_model
from Simulator import PendulumParams, generate_dataset

TINY_MODEL = {
    "height": 8,
    "width": 8,
    "channels": 1,
    "latent_dim": 2,
    "inducing_points": 4,
    "filters": 4,
    "encoder_hidden": 8,
    "forward_hidden": 8,
}


@pytest.fixture
def make_model_config():
    def make(**overrides):
        return replace(config.model, **{**TINY_MODEL, **overrides})

    return make


@pytest.fixture
def make_model(make_model_config):
    def make(family=ModelFamily.SVDKL, seed=0, control_scale=2.0, **overrides):
        cfg = make_model_config(family=family, **overrides)
        return build_model(cfg, control_scale, np.random.default_rng(seed))

    return make


@pytest.fixture
def make_train_config():
    def make(**overrides):
        defaults = {"batch_size": 4, "epochs": 2, "seed": 11}
        return replace(config.train, **{**defaults, **overrides})

    return make


@pytest.fixture
def quiet_noise():
    return NoiseConfig(measurement_variance=0.0, control_variance=0.0, dynamics_variance=0.0)


@pytest.fixture(scope="session")
def small_dataset():
    params = PendulumParams(
        mass=1.0,
        length=1.0,
        gravity=10.0,
        dt=0.05,
        torque_limit=2.0,
        max_speed=8.0,
        dynamics_std=0.0,
    )
    noise = NoiseConfig(measurement_variance=0.0, control_variance=0.0, dynamics_variance=0.0)
    return generate_dataset(None, 24, 6, params, noise, 16, 16, 1, 3)


@pytest.fixture
def frames():
    def make(batch=4, height=8, width=8, channels=1, seed=0):
        rng = np.random.default_rng(seed)
        return rng.random((batch, 2 * channels, height, width))

    return make
