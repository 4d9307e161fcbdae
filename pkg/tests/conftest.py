from __future__ import annotations

import numpy as np
import pytest

from geomotion import TrainConfig, build_graph, gen_toy_jc, train

SMALL_TOY_CONFIG = TrainConfig(
    hidden=(48, 32),
    rbf_kernels=80,
    epochs=400,
    stage2_epochs=150,
    batch_size=64,
    seed=3,
)


@pytest.fixture(scope="session")
def small_toy_dataset():
    return gen_toy_jc(samples=60, noise_std=0.008, seed=11, demos=3)


@pytest.fixture(scope="session")
def small_toy_model(small_toy_dataset):
    """A quickly trained toy model for behavioral tests (not acceptance-grade)."""
    return train(small_toy_dataset.demonstrations, SMALL_TOY_CONFIG)


@pytest.fixture(scope="session")
def small_toy_graph(small_toy_model):
    return build_graph(small_toy_model, grid_size=40)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
