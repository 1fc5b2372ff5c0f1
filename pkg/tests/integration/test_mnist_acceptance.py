"""
Acceptance Tests on MNIST (desk scale)

Baseline (mu = 0) against Fisher-trace regularized (mu = 0.02) ConvNets
trained for 3 epochs on the first 10k training images. Needs the IDX files
under FIMGUARD_DATA_DIR; skipped otherwise. Runs for tens of minutes on CPU.
"""

import pytest

from fimguard.attacks.registry import AttackConfig
from fimguard.config.settings import settings
from fimguard.data.datasets import load_mnist_split, mnist_available
from fimguard.evaluation.robustness import (
    common_eligible,
    cross_model_transfer,
    fooling_curve,
    mean_adv_distance,
)
from fimguard.models.network import build_convnet
from fimguard.training.trainer import TrainConfig, evaluate_accuracy, train

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(not mnist_available(settings.data_dir),
                       reason=f"MNIST IDX files not found in {settings.data_dir}"),
]

OSSA_GRID = [1.0, 2.0, 4.0, 6.0]
DISTANCE_ATTACKS = [
    AttackConfig(name="fgsm"),
    AttackConfig(name="bim", norm="l2", steps=10),
    AttackConfig(name="deepfool"),
    AttackConfig(name="pgd", steps=10),
]
TRANSFER_ATTACKS = [AttackConfig(name="fgsm", epsilon=0.2), AttackConfig(name="pgd", epsilon=0.1)]


@pytest.fixture(scope="module")
def mnist():
    return load_mnist_split(settings.data_dir, train_limit=10000, test_limit=2000)


@pytest.fixture(scope="module")
def models(mnist):
    train_set, _ = mnist
    nets = {}
    for name, mu in (("baseline", 0.0), ("defended", 0.02)):
        net = build_convnet(train_set.input_shape, train_set.num_classes, seed=0)
        config = TrainConfig(regime="fim", mu=mu, epochs=3, batch_size=64, lr=0.05,
                             precision="float32")
        nets[name], _ = train(net, train_set, config)
    return nets


class TestDefenseEffect:
    """The regularized model resists the spectral attack at equal accuracy."""

    def test_accuracy_preserved(self, mnist, models):
        """Test accuracies stay within 1.5 points."""
        _, test_set = mnist
        gap = evaluate_accuracy(models["baseline"], test_set) - \
            evaluate_accuracy(models["defended"], test_set)
        assert abs(gap) <= 0.015

    def test_ossa_fooling_ratio_lower(self, mnist, models):
        """Lower OSSA fooling ratio at every epsilon, 30 points lower at 6."""
        _, test_set = mnist
        nets = [models["baseline"], models["defended"]]
        indices = common_eligible(nets, test_set, limit=500)
        attack = AttackConfig(name="ossa")
        base, defended = (fooling_curve(net, attack, OSSA_GRID, test_set, indices,
                                        settings.threads) for net in nets)
        for b, d in zip(base.points, defended.points):
            assert d.ratio < b.ratio
        assert base.points[-1].ratio - defended.points[-1].ratio >= 0.30


class TestDistanceAmplification:
    """Attacks need larger perturbations against the regularized model."""

    @pytest.mark.parametrize("attack", DISTANCE_ATTACKS, ids=lambda a: a.name)
    def test_distance_ratio(self, mnist, models, attack):
        """Mean adversarial distance grows by at least 15%."""
        _, test_set = mnist
        nets = [models["baseline"], models["defended"]]
        indices = common_eligible(nets, test_set, limit=200)
        base, defended = (mean_adv_distance(net, attack, test_set, indices, settings.threads)
                          for net in nets)
        assert defended.mean_distance / base.mean_distance >= 1.15


class TestBlackBoxAsymmetry:
    """Transfer hurts the regularized model less than the baseline."""

    @pytest.mark.parametrize("attack", TRANSFER_ATTACKS, ids=lambda a: a.name)
    def test_transfer_asymmetry(self, mnist, models, attack):
        """accuracy(defended | baseline examples) > accuracy(baseline | defended examples)."""
        _, test_set = mnist
        base, defended = models["baseline"], models["defended"]
        indices = common_eligible([base, defended], test_set, limit=200)
        to_defended = cross_model_transfer(base, defended, attack, test_set, indices,
                                           threads=settings.threads)
        to_base = cross_model_transfer(defended, base, attack, test_set, indices,
                                       threads=settings.threads)
        assert to_defended.accuracy > to_base.accuracy
