"""
Shared fixtures: small seeded networks, synthetic datasets and the
two-class affine model whose decision boundary is known in closed form.
"""

import numpy as np
import pytest

from fimguard.data.datasets import synthetic_blobs, synthetic_split
from fimguard.models.network import build_convnet, build_mlp
from fimguard.training.trainer import TrainConfig, train

# Affine two-class model: z0 = w.x - 0.7, z1 = -w.x + 0.7 with w = 0.5 * ones(4).
# At x = 0.5 * ones(4) class 0 wins and the boundary w.x = 0.7 is 0.3 away in l2.


def make_affine_net():
    net = build_mlp(4, [], 2, seed=0)
    w = 0.5 * np.ones(4)
    layer = net.final_linear()
    layer.weight.data = np.stack([w, -w], axis=1)
    layer.bias.data = np.array([-0.7, 0.7])
    return net.freeze()


@pytest.fixture
def affine_net():
    return make_affine_net()


@pytest.fixture
def affine_x():
    return 0.5 * np.ones(4)


@pytest.fixture
def mlp():
    """Untrained 6-8-3 relu MLP, frozen."""
    return build_mlp(6, [8], 3, seed=1).freeze()


@pytest.fixture
def small_convnet():
    return build_convnet((1, 8, 8), 3, seed=0).freeze()


@pytest.fixture
def blobs():
    return synthetic_blobs(num_classes=3, per_class=40, dim=6, seed=0)


@pytest.fixture
def blob_split():
    return synthetic_split(3, 40, 15, 6, seed=0)


@pytest.fixture
def trained_mlp(blob_split):
    """MLP trained on well separated blobs; classifies most test points correctly."""
    train_set, _ = blob_split
    net = build_mlp(6, [16], 3, seed=0, input_shape=train_set.input_shape)
    net, _ = train(net, train_set, TrainConfig(epochs=8, batch_size=16, lr=0.1, seed=0))
    return net


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
