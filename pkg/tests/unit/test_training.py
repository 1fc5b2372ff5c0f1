"""
Unit Tests for the training regimes

Loss composition for baseline / Fisher-trace / label smoothing, the
optimizers, the training loop contract and the centering effect of mu.
"""

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from fimguard.core.functional import cross_entropy, one_hot
from fimguard.core.tensor import Tensor, get_default_dtype
from fimguard.data.datasets import synthetic_split
from fimguard.errors import DivergenceError, EmptySampleSetError
from fimguard.models.network import build_mlp
from fimguard.training import trainer as trainer_module
from fimguard.training.optim import SGD, Adam
from fimguard.training.trainer import (
    LOG_COLUMNS,
    LossBreakdown,
    TrainConfig,
    evaluate_accuracy,
    fisher_trace_penalty,
    loss_breakdown,
    lsr_labels,
    mean_max_probability,
    train,
)


def fresh_mlp(dataset, hidden=(16,), seed=0):
    return build_mlp(dataset.input_dim, list(hidden), dataset.num_classes, seed=seed,
                     input_shape=dataset.input_shape)


class TestTrainConfig:
    """Training hyperparameter validation."""

    def test_defaults(self):
        """Baseline regime with the desk-scale schedule."""
        config = TrainConfig()
        assert config.regime == "baseline"
        assert config.effective_mu == 0.0
        assert config.epochs == 3 and config.decay_epoch == 2

    def test_mu_requires_fim_regime(self):
        """A nonzero mu outside the fim regime is rejected."""
        with pytest.raises(ValidationError):
            TrainConfig(regime="lsr", mu=0.1)

    def test_rejects_negative_mu_and_bad_alpha(self):
        """mu >= 0 and alpha in (0, 1)."""
        with pytest.raises(ValidationError):
            TrainConfig(regime="fim", mu=-0.1)
        with pytest.raises(ValidationError):
            TrainConfig(regime="lsr", alpha=1.0)

    def test_unknown_keys_rejected(self):
        """Typos in config keys are errors."""
        with pytest.raises(ValidationError):
            TrainConfig(epoch=3)

    def test_decay_epoch_minimum(self):
        """A single epoch still has a decay point of one."""
        assert TrainConfig(epochs=1).decay_epoch == 1


class TestLosses:
    """Loss components."""

    def test_lsr_labels(self):
        """Smoothed rows are y(1 - alpha) + alpha / K and sum to one."""
        smoothed = lsr_labels(one_hot(np.array([0, 2]), 4), 0.1)
        np.testing.assert_allclose(smoothed[0], [0.925, 0.025, 0.025, 0.025])
        np.testing.assert_allclose(smoothed.sum(axis=1), 1.0)

    def test_lsr_alpha_range(self):
        """alpha outside (0, 1) is rejected."""
        with pytest.raises(ValueError):
            lsr_labels(one_hot(np.array([0]), 3), 0.0)

    def test_fisher_trace_penalty(self):
        """Per-sample sum of 1/p."""
        probs = Tensor(np.array([[0.5, 0.25, 0.25], [1 / 3, 1 / 3, 1 / 3]]))
        np.testing.assert_allclose(fisher_trace_penalty(probs).data, [10.0, 9.0])

    def test_breakdown_identity(self, rng):
        """total = ce + mu * reg."""
        probs = Tensor(rng.dirichlet(np.ones(3), size=5))
        labels = rng.integers(0, 3, 5)
        parts = loss_breakdown(probs, labels, 0.05)
        assert isinstance(parts, LossBreakdown)
        assert parts.total.item() == pytest.approx(parts.ce + 0.05 * parts.reg, rel=1e-12)

    def test_mu_zero_is_plain_cross_entropy(self, rng):
        """mu = 0 gives exactly the batch-mean cross-entropy."""
        probs = Tensor(rng.dirichlet(np.ones(4), size=6))
        labels = rng.integers(0, 4, 6)
        expected = cross_entropy(probs, one_hot(labels, 4)).mean().item()
        parts = loss_breakdown(probs, labels, 0.0)
        assert parts.total.item() == expected
        assert parts.reg > 0.0


class TestOptimizers:
    """SGD and Adam updates."""

    def test_sgd_momentum(self):
        """v = m*v + g; p -= lr*v."""
        p = Tensor(np.array([1.0]))
        opt = SGD([p], lr=0.1, momentum=0.5)
        opt.step([np.array([1.0])])
        opt.step([np.array([1.0])])
        assert p.data[0] == pytest.approx(1.0 - 0.1 * 1.0 - 0.1 * 1.5)

    def test_sgd_step_decay(self):
        """The lr drops by the decay factor from decay_epoch on."""
        opt = SGD([Tensor([0.0])], lr=0.05, decay_epoch=2)
        assert opt.set_epoch(1) == pytest.approx(0.05)
        assert opt.set_epoch(2) == pytest.approx(0.005)

    def test_sgd_skips_missing_gradients(self):
        """None gradients leave parameters untouched."""
        p = Tensor(np.array([2.0]))
        SGD([p]).step([None])
        assert p.data[0] == 2.0

    def test_sgd_rejects_bad_hyperparameters(self):
        """lr > 0 and momentum in [0, 1)."""
        with pytest.raises(ValueError):
            SGD([], lr=0.0)
        with pytest.raises(ValueError):
            SGD([], momentum=1.0)

    def test_adam_first_step(self):
        """With bias correction the first step is lr * sign(g)."""
        p = Tensor(np.array([0.0, 0.0]))
        Adam([p], lr=0.01).step([np.array([3.0, -0.5])])
        np.testing.assert_allclose(p.data, [-0.01, 0.01], rtol=1e-6)


class TestTrainLoop:
    """The shared training loop."""

    def test_training_learns_blobs(self, blob_split):
        """A few epochs separate well spaced blobs."""
        train_set, test_set = blob_split
        net, log = train(fresh_mlp(train_set), train_set,
                         TrainConfig(epochs=6, batch_size=16, lr=0.1), eval_set=test_set)
        assert evaluate_accuracy(net, test_set) >= 0.9
        assert len(log) == 6
        assert log.records[-1].test_acc == evaluate_accuracy(net, test_set)

    def test_log_rows_satisfy_identity(self, blob_split):
        """Every epoch row has loss = ce + mu * reg."""
        train_set, _ = blob_split
        _, log = train(fresh_mlp(train_set), train_set,
                       TrainConfig(regime="fim", mu=0.02, epochs=2, batch_size=20))
        for record in log.records:
            assert record.loss == pytest.approx(record.ce + 0.02 * record.reg, rel=1e-9)

    def test_deterministic(self, blob_split):
        """Same seed and config give bit-identical weights."""
        train_set, _ = blob_split
        config = TrainConfig(regime="fim", mu=0.01, epochs=2, batch_size=16, seed=3)
        a, _ = train(fresh_mlp(train_set), train_set, config)
        b, _ = train(fresh_mlp(train_set), train_set, config)
        assert a.checkpoint_hash() == b.checkpoint_hash()

    def test_result_is_frozen_float64(self, blob_split):
        """float32 training ends with a frozen float64 network and restores the dtype."""
        train_set, _ = blob_split
        before = get_default_dtype()
        net, _ = train(fresh_mlp(train_set), train_set,
                       TrainConfig(epochs=1, batch_size=32, precision="float32"))
        assert net.dtype == np.float64
        assert not any(p.requires_grad for p in net.parameters())
        assert get_default_dtype() is before

    def test_on_epoch_callback(self, blob_split):
        """The callback sees each record and the epoch count."""
        train_set, _ = blob_split
        seen = []
        train(fresh_mlp(train_set), train_set, TrainConfig(epochs=2, batch_size=32),
              on_epoch=lambda record, epochs: seen.append((record.epoch, epochs)))
        assert seen == [(1, 2), (2, 2)]

    def test_lsr_regime_runs(self, blob_split):
        """Label smoothing trains and reports zero mu."""
        train_set, _ = blob_split
        _, log = train(fresh_mlp(train_set), train_set,
                       TrainConfig(regime="lsr", alpha=0.2, epochs=1, batch_size=32))
        assert log.mu == 0.0
        assert log.records[0].loss == pytest.approx(log.records[0].ce)

    def test_divergence_names_epoch_and_batch(self, blob_split, monkeypatch):
        """A non-finite loss raises DivergenceError and leaves the net frozen."""
        train_set, _ = blob_split

        def broken(probs, labels, mu, targets=None):
            total = probs.sum() * float("nan")
            return LossBreakdown(total=total, ce=float("nan"), reg=0.0)

        monkeypatch.setattr(trainer_module, "loss_breakdown", broken)
        net = fresh_mlp(train_set)
        with pytest.raises(DivergenceError) as info:
            train(net, train_set, TrainConfig(epochs=1, batch_size=32))
        assert info.value.epoch == 1 and info.value.batch == 0
        assert not any(p.requires_grad for p in net.parameters())

    def test_empty_dataset(self, blobs):
        """Training and evaluation on nothing are rejected."""
        empty = blobs.subset([])
        with pytest.raises(EmptySampleSetError):
            train(fresh_mlp(blobs), empty, TrainConfig())
        with pytest.raises(EmptySampleSetError):
            evaluate_accuracy(fresh_mlp(blobs), empty)

    def test_trainlog_csv(self, blob_split, tmp_path):
        """The CSV has one row per epoch with the documented columns."""
        train_set, _ = blob_split
        _, log = train(fresh_mlp(train_set), train_set, TrainConfig(epochs=2, batch_size=32))
        frame = pd.read_csv(log.to_csv(tmp_path / "trainlog.csv"))
        assert list(frame.columns) == LOG_COLUMNS
        assert frame["epoch"].tolist() == [1, 2]


class TestCentering:
    """Larger mu moves predictions toward the centre of the simplex."""

    def test_mean_max_probability_non_increasing_in_mu(self):
        """Mean max-probability falls with mu; small mu keeps accuracy."""
        train_set, _ = synthetic_split(4, 50, 10, 8, seed=2, noise=0.08)
        maxp, accuracy = [], []
        for mu in (0.0, 0.01, 0.1, 1.0):
            net = fresh_mlp(train_set, hidden=())
            net, _ = train(net, train_set, TrainConfig(regime="fim", mu=mu, epochs=10,
                                                       batch_size=16, lr=0.1, seed=0))
            maxp.append(mean_max_probability(net, train_set))
            accuracy.append(evaluate_accuracy(net, train_set))
        for larger, smaller in zip(maxp, maxp[1:]):
            assert smaller <= larger + 1e-9
        assert abs(accuracy[1] - accuracy[0]) <= 0.05
