"""Tests for network initialization, the forward pass, gradients and the model file"""

import json
import math

import numpy as np
import pytest

from .data_models import NormalizationConstants
from .errors import ConfigurationError, FormatError, ShapeError
from .fcnn import (
    Activation, DenseLayer, FcnnModel, Head, LossKind, forward, init_model, layer_chain, load_model, loss_and_grad,
    model_to_document, save_model,
)

NORM = NormalizationConstants(max_abs_x=12, max_abs_y=7)


def test_same_seed_same_model():
    a = init_model([8, 8, 8, 3], Head.SOFTMAX3, seed=5)
    b = init_model([8, 8, 8, 3], Head.SOFTMAX3, seed=5)
    for p, q in zip(a.parameters(), b.parameters()):
        np.testing.assert_array_equal(p, q)


def test_default_classifier_shape():
    model = init_model(layer_chain(8, [8] * 5, Head.SOFTMAX3), Head.SOFTMAX3, seed=0)
    assert model.hidden_sizes == [8, 8, 8, 8, 8]
    assert model.input_size == 8
    assert [layer.activation for layer in model.layers] == [Activation.TANH] * 5 + [Activation.LINEAR]
    assert all(not layer.bias.any() for layer in model.layers)


def test_glorot_limits():
    model = init_model([6, 10, 1], Head.SCALAR, seed=1)
    assert np.abs(model.layers[0].weights).max() <= math.sqrt(6.0 / 16)
    assert np.abs(model.layers[1].weights).max() <= math.sqrt(6.0 / 11)


def test_head_mismatch_rejected():
    with pytest.raises(ConfigurationError):
        init_model([8, 8, 2], Head.SOFTMAX3, seed=0)
    with pytest.raises(ConfigurationError):
        init_model([8], Head.SCALAR, seed=0)


def test_broken_chain_rejected():
    layers = [
        DenseLayer(np.zeros((4, 6)), np.zeros(4), Activation.TANH),
        DenseLayer(np.zeros((1, 5)), np.zeros(1), Activation.LINEAR),
    ]
    with pytest.raises(ConfigurationError):
        FcnnModel(layers=layers, head=Head.SCALAR, norm=NORM)


def test_zero_network_is_uniform():
    model = init_model([8, 8, 3], Head.SOFTMAX3, seed=0)
    model = model.with_parameters([np.zeros_like(p) for p in model.parameters()])
    probs, _ = forward(model, np.ones(8))
    np.testing.assert_allclose(probs, [1 / 3, 1 / 3, 1 / 3])


def test_affine_layer():
    model = FcnnModel(
        layers=[DenseLayer(np.array([[2.0]]), np.array([1.0]), Activation.LINEAR)],
        head=Head.SCALAR, norm=NORM,
    )
    out, _ = forward(model, np.array([3.0]))
    assert out.tolist() == [7.0]


def test_batched_forward_matches_single(rng):
    model = init_model([6, 8, 8, 1], Head.SCALAR, seed=2)
    batch = rng.uniform(-0.8, 0.8, size=(5, 6))
    out, _ = forward(model, batch)
    for row, value in zip(batch, out):
        np.testing.assert_allclose(forward(model, row)[0], value)


def test_input_shape_checked():
    model = init_model([6, 8, 1], Head.SCALAR, seed=0)
    with pytest.raises(ShapeError):
        forward(model, np.zeros(8))


def test_exact_fit_has_zero_loss():
    model = FcnnModel(
        layers=[DenseLayer(np.array([[1.0, 0.0]]), np.array([0.0]), Activation.LINEAR)],
        head=Head.SCALAR, norm=NORM,
    )
    inputs = np.array([[0.1, 5.0], [-0.3, 2.0]])
    loss, grads = loss_and_grad(model, inputs, np.array([0.1, -0.3]), LossKind.EUCLIDEAN)
    assert loss == pytest.approx(0.0)
    for g in grads:
        np.testing.assert_allclose(g, 0.0, atol=1e-15)


def test_uniform_cross_entropy():
    model = init_model([4, 3], Head.SOFTMAX3, seed=0)
    model = model.with_parameters([np.zeros_like(p) for p in model.parameters()])
    loss, _ = loss_and_grad(model, np.zeros((1, 4)), np.array([2]), LossKind.CROSS_ENTROPY)
    assert loss == pytest.approx(math.log(3))


def test_loss_must_match_head():
    model = init_model([6, 8, 1], Head.SCALAR, seed=0)
    with pytest.raises(ConfigurationError):
        loss_and_grad(model, np.zeros((2, 6)), np.array([0, 1]), LossKind.CROSS_ENTROPY)


def _finite_difference(model, inputs, targets, loss, h=1e-5):
    grads = []
    params = model.parameters()
    for k, p in enumerate(params):
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            shifted = [q.copy() for q in params]
            shifted[k][idx] += h
            up, _ = loss_and_grad(model.with_parameters(shifted), inputs, targets, loss)
            shifted[k][idx] -= 2 * h
            down, _ = loss_and_grad(model.with_parameters(shifted), inputs, targets, loss)
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


@pytest.mark.parametrize('head,chain', [(Head.SOFTMAX3, [8, 8, 3]), (Head.SCALAR, [6, 8, 1])])
def test_gradients_match_finite_differences(rng, head, chain):
    for draw in range(100):
        model = init_model(chain, head, seed=draw)
        # non-zero biases exercise the bias gradient
        model = model.with_parameters([p + rng.normal(0, 0.1, size=p.shape) for p in model.parameters()])
        inputs = rng.uniform(-0.8, 0.95, size=(7, chain[0]))
        if head is Head.SOFTMAX3:
            targets, loss = rng.integers(0, 3, size=7), LossKind.CROSS_ENTROPY
        else:
            targets, loss = rng.uniform(-1, 1, size=7), LossKind.EUCLIDEAN

        _, analytic = loss_and_grad(model, inputs, targets, loss)
        numeric = _finite_difference(model, inputs, targets, loss)
        for a, n in zip(analytic, numeric):
            np.testing.assert_allclose(a, n, rtol=1e-5, atol=1e-8)


def test_model_file_preserves_outputs(tmp_path, rng):
    model = init_model([8, 8, 8, 3], Head.SOFTMAX3, seed=9, norm=NORM)
    model = model.with_parameters([p + rng.normal(0, 0.3, size=p.shape) for p in model.parameters()])
    path = tmp_path / 'classifier_x.json'
    save_model(model, path)

    loaded = load_model(path)
    assert loaded.norm == NORM
    assert loaded.head is Head.SOFTMAX3
    inputs = rng.uniform(-1, 1, size=(20, 8))
    np.testing.assert_array_equal(forward(loaded, inputs)[0], forward(model, inputs)[0])


def test_infinite_val_loss_saved_as_null(tmp_path):
    model = init_model([6, 4, 1], Head.SCALAR, seed=0)
    model.meta = model.meta.model_copy(update={'final_val_loss': math.inf})
    assert model_to_document(model)['meta']['final_val_loss'] is None


def test_truncated_model_file(tmp_path):
    path = tmp_path / 'model.json'
    save_model(init_model([6, 4, 1], Head.SCALAR, seed=0), path)
    text = path.read_text()
    path.write_text(text[:len(text) // 2])
    with pytest.raises(FormatError) as excinfo:
        load_model(path)
    assert excinfo.value.offset is not None


def test_model_file_needs_norm(tmp_path):
    document = model_to_document(init_model([6, 4, 1], Head.SCALAR, seed=0))
    del document['norm']
    path = tmp_path / 'model.json'
    path.write_text(json.dumps(document))
    with pytest.raises(FormatError) as excinfo:
        load_model(path)
    assert excinfo.value.key == 'norm'


def test_model_file_version(tmp_path):
    document = model_to_document(init_model([6, 4, 1], Head.SCALAR, seed=0))
    document['version'] = 2
    path = tmp_path / 'model.json'
    path.write_text(json.dumps(document))
    with pytest.raises(FormatError) as excinfo:
        load_model(path)
    assert excinfo.value.key == 'version'


def test_model_file_layer_size(tmp_path):
    document = model_to_document(init_model([6, 4, 1], Head.SCALAR, seed=0))
    document['layers'][0]['w'] = document['layers'][0]['w'][:-1]
    path = tmp_path / 'model.json'
    path.write_text(json.dumps(document))
    with pytest.raises(FormatError):
        load_model(path)
