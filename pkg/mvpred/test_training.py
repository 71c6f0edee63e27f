"""Tests for full-batch training and early stopping"""

import numpy as np
import pytest

from . import training
from .config import OptimizerConfig, TrainingConfig
from .data_models import NormalizationConstants
from .errors import ConfigurationError
from .fcnn import Head, forward, init_model
from .training import accuracy, fit_network, train, validation_split, write_history_csv

NORM = NormalizationConstants(max_abs_x=4, max_abs_y=4)


def _config(**overrides) -> TrainingConfig:
    return TrainingConfig(**overrides)


def test_validation_split_is_seeded_and_disjoint():
    train_idx, val_idx = validation_split(100, 0.3, seed=4)
    assert len(val_idx) == 30 and len(train_idx) == 70
    assert not set(train_idx) & set(val_idx)
    again_train, again_val = validation_split(100, 0.3, seed=4)
    np.testing.assert_array_equal(val_idx, again_val)


def test_validation_split_without_hold_out():
    train_idx, val_idx = validation_split(5, 0.0, seed=0)
    np.testing.assert_array_equal(train_idx, val_idx)


def test_validation_split_keeps_a_training_sample():
    train_idx, val_idx = validation_split(2, 0.9, seed=0)
    assert len(train_idx) == 1 and len(val_idx) == 1


def test_flat_validation_loss_stops_after_patience(monkeypatch):
    """With updates disabled the loss never moves: epoch 1 sets the reference, 20 idle epochs follow"""
    monkeypatch.setattr(training, 'apply_step', lambda state, params, grads: params)
    model = init_model([6, 4, 1], Head.SCALAR, seed=0, norm=NORM)
    inputs = np.random.default_rng(0).uniform(-0.8, 0.8, size=(30, 6))
    trained, history = train(model, inputs, np.zeros(30), _config(patience=20, min_delta=0.01), seed=0,
                             max_epochs=500)
    assert len(history) == 21
    assert trained.meta.epochs_run == 21


def test_zero_target_from_zero_network():
    model = init_model([6, 4, 1], Head.SCALAR, seed=0, norm=NORM)
    model = model.with_parameters([np.zeros_like(p) for p in model.parameters()])
    trained, history = train(model, np.ones((10, 6)), np.zeros(10), _config(), seed=0, max_epochs=50)
    assert history[0].val_loss == 0.0
    assert trained.meta.final_val_loss == 0.0
    for p in trained.parameters():
        assert not p.any()


def test_training_is_deterministic(rng):
    inputs = rng.uniform(-0.8, 0.8, size=(60, 6))
    targets = inputs[:, 0] * 0.5
    runs = [
        fit_network(Head.SCALAR, inputs, targets, [8, 8], NORM, _config(), seed=3, max_epochs=40)
        for _ in range(2)
    ]
    assert runs[0][1] == runs[1][1]
    for p, q in zip(runs[0][0].parameters(), runs[1][0].parameters()):
        np.testing.assert_array_equal(p, q)


def test_regression_learns_linear_target(rng):
    """y = 0.3·x1 - 0.1·x4 drops below 1e-3 within 500 epochs at learning rate 0.01"""
    inputs = rng.uniform(-0.8, 0.8, size=(1000, 6))
    targets = 0.3 * inputs[:, 0] - 0.1 * inputs[:, 3]
    config = _config(patience=500, min_delta=0.0, optimizer=OptimizerConfig(learning_rate=0.01))
    model, history = fit_network(Head.SCALAR, inputs, targets, [8], NORM, config, seed=1, max_epochs=500)
    assert len(history) <= 500
    assert min(record.val_loss for record in history) < 1e-3
    assert model.hidden_sizes == [8]
    assert model.norm == NORM


def test_best_validation_parameters_are_restored(rng):
    inputs = rng.uniform(-0.8, 0.8, size=(80, 6))
    targets = np.sin(3 * inputs[:, 1])
    config = _config(optimizer=OptimizerConfig(learning_rate=0.05))
    model, history = fit_network(Head.SCALAR, inputs, targets, [8, 8], NORM, config, seed=2, max_epochs=200)

    best = min(record.val_loss for record in history)
    assert model.meta.final_val_loss == best

    _, val_idx = validation_split(80, config.validation_fraction, seed=2)
    outputs, _ = forward(model, inputs[val_idx])
    assert float(np.mean((outputs[:, 0] - targets[val_idx]) ** 2)) == pytest.approx(best)


def test_classifier_learns_separable_labels(rng):
    inputs = rng.uniform(-0.8, 0.95, size=(300, 8))
    labels = np.argmax(inputs[:, :3], axis=1)
    config = _config(patience=100, min_delta=0.0, optimizer=OptimizerConfig(learning_rate=0.02))
    model, history = fit_network(Head.SOFTMAX3, inputs, labels, [8, 8], NORM, config, seed=0, max_epochs=600)
    assert max(record.val_accuracy for record in history) > 0.7
    assert accuracy(model, inputs, labels) > 0.7


@pytest.mark.parametrize('kind', ['momentum', 'rmsprop', 'adam'])
def test_every_optimizer_reduces_loss(rng, kind):
    inputs = rng.uniform(-0.8, 0.8, size=(100, 6))
    targets = 0.4 * inputs[:, 2]
    config = _config(optimizer=OptimizerConfig(kind=kind, learning_rate=0.01), patience=200, min_delta=0.0)
    _, history = fit_network(Head.SCALAR, inputs, targets, [8], NORM, config, seed=0, max_epochs=150)
    assert history[-1].train_loss < history[0].train_loss


def test_empty_training_set():
    model = init_model([6, 4, 1], Head.SCALAR, seed=0)
    with pytest.raises(ConfigurationError):
        train(model, np.zeros((0, 6)), np.zeros(0), _config(), seed=0, max_epochs=10)
    with pytest.raises(ConfigurationError):
        fit_network(Head.SCALAR, np.zeros((0, 6)), np.zeros(0), [4], NORM, _config(), seed=0)


def test_default_epoch_limits(monkeypatch):
    seen = {}

    def fake_train(model, inputs, targets, config, seed, max_epochs, loss=None):
        seen[model.head] = max_epochs
        return model, []

    monkeypatch.setattr(training, 'train', fake_train)
    fit_network(Head.SOFTMAX3, np.zeros((4, 8)), np.zeros(4), [8], NORM, _config(), seed=0)
    fit_network(Head.SCALAR, np.zeros((4, 6)), np.zeros(4), [8], NORM, _config(), seed=0)
    assert seen == {Head.SOFTMAX3: 500, Head.SCALAR: 50}


def test_history_csv(tmp_path, rng):
    inputs = rng.uniform(-0.8, 0.8, size=(20, 8))
    _, history = fit_network(Head.SOFTMAX3, inputs, rng.integers(0, 3, size=20), [4], NORM, _config(),
                             seed=0, max_epochs=5)
    path = tmp_path / 'history.csv'
    write_history_csv(path, history)
    lines = path.read_text().splitlines()
    assert lines[0] == 'epoch,train_loss,val_loss,val_accuracy'
    assert len(lines) == len(history) + 1
