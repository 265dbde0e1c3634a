import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.models.mlp import MlpModel, cross_entropy, cross_entropy_batch, forward, loss_and_gradients
from src.models.optimizer import OptimizerState, poly_lr, sgd_step
from src.utils.validators import NumericError, ShapeError, ValidationError


def test_zero_model_gives_uniform_rows():
    """softmax(0) is uniform whatever the input."""
    model = MlpModel.zeros((5, 7, 4))
    probs, features = forward(model, np.random.default_rng(0).normal(size=(3, 5)))
    assert np.allclose(probs, 0.25)
    assert features.shape == (3, 7)


def test_single_layer_closed_form():
    model = MlpModel((4, 4), [np.eye(4)], [np.zeros(4)])
    probs, _ = forward(model, [[math.log(2.0), 0.0, 0.0, 0.0]])
    assert np.allclose(probs[0], [0.4, 0.2, 0.2, 0.2], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 20))
def test_rows_sum_to_one(seed, n):
    model = MlpModel.build(6, 4, hidden_dims=(5, 3), seed=seed)
    x = np.random.default_rng(seed).normal(scale=5.0, size=(n, 6))
    probs, _ = forward(model, x)
    assert np.all(np.abs(probs.sum(axis=1) - 1.0) <= 1e-12)
    assert np.all(probs >= 0)


def test_forward_rejects_wrong_width():
    model = MlpModel.build(6, 4, seed=0)
    with pytest.raises(ShapeError):
        forward(model, np.zeros((2, 5)))


def test_non_finite_parameters_rejected():
    with pytest.raises(NumericError):
        MlpModel((2, 2), [np.array([[np.nan, 0.0], [0.0, 0.0]])], [np.zeros(2)])


def test_mismatched_layer_shapes_rejected():
    with pytest.raises(ShapeError):
        MlpModel((3, 2), [np.zeros((2, 2))], [np.zeros(2)])


def test_glorot_initialisation_is_seeded_and_bounded():
    a = MlpModel.build(16, 4, seed=42)
    b = MlpModel.build(16, 4, seed=42)
    c = MlpModel.build(16, 4, seed=43)
    assert a.same_parameters(b)
    assert not a.same_parameters(c)
    limit = math.sqrt(6.0 / (16 + 32))
    assert np.all(np.abs(a.weights[0]) <= limit)
    assert all(np.all(bias == 0) for bias in a.biases)
    assert a.layer_dims == (16, 32, 16, 4)
    assert a.feature_dim == 16


@pytest.mark.parametrize("probs, label, expected", [
    ((1.0, 0.0, 0.0, 0.0), 0, 0.0),
    ((0.25, 0.25, 0.25, 0.25), 2, 1.3862944),
    ((0.5, 0.3, 0.1, 0.1), 1, 1.2039728),
])
def test_cross_entropy_examples(probs, label, expected):
    assert cross_entropy(probs, label) == pytest.approx(expected, abs=1e-7)


def test_cross_entropy_clamps_zero_probability():
    assert cross_entropy((1.0, 0.0), 1) == pytest.approx(-math.log(1e-12))


def test_cross_entropy_label_out_of_range():
    with pytest.raises(IndexError):
        cross_entropy((0.5, 0.5), 2)
    with pytest.raises(IndexError):
        cross_entropy_batch(np.full((1, 2), 0.5), [3])


def test_poly_lr_examples():
    assert poly_lr(OptimizerState(lr0=0.1, total_steps=100)) == pytest.approx(0.1)
    assert poly_lr(OptimizerState(lr0=0.1, total_steps=100, step=100)) == 0.0
    assert poly_lr(OptimizerState(lr0=0.01, total_steps=10, step=5)) == pytest.approx(0.01 * 0.5 ** 0.9, abs=1e-12)
    assert round(poly_lr(OptimizerState(lr0=0.01, total_steps=10, step=5)), 7) == 0.0053589


def test_optimizer_state_validation():
    with pytest.raises(ValidationError):
        OptimizerState(lr0=-1.0, total_steps=10)
    with pytest.raises(ValidationError):
        OptimizerState(lr0=0.1, total_steps=10, step=11)


def test_sgd_step_with_zero_lr_leaves_model_unchanged():
    model = MlpModel.build(4, 3, hidden_dims=(5,), seed=1)
    before = model.copy()
    x = np.random.default_rng(1).normal(size=(6, 4))
    _, losses = sgd_step(model, x, [0, 1, 2, 0, 1, 2], OptimizerState(lr0=0.0, total_steps=10))
    assert model.same_parameters(before)
    assert losses.shape == (6,)
    assert np.all(losses > 0)


def test_sgd_step_advances_schedule():
    opt = OptimizerState(lr0=0.1, total_steps=3)
    model = MlpModel.build(2, 2, hidden_dims=(3,), seed=0)
    for expected in (1, 2, 3, 3):
        sgd_step(model, [[0.1, 0.2]], [1], opt)
        assert opt.step == expected


def test_duplicated_sample_matches_single_sample_update():
    """The gradient is a mean, so repeating a sample changes nothing."""
    x = np.array([[0.3, -1.2, 0.5]])
    one = MlpModel.build(3, 4, hidden_dims=(5, 4), seed=9)
    two = one.copy()
    sgd_step(one, x, [2], OptimizerState(lr0=0.1, total_steps=10))
    sgd_step(two, np.vstack([x, x]), [2, 2], OptimizerState(lr0=0.1, total_steps=10))
    for a, b in zip(one.parameters(), two.parameters()):
        assert np.allclose(a, b, rtol=0, atol=1e-12)


def test_single_linear_layer_gradient_is_softmax_minus_onehot():
    model = MlpModel((3, 4), [np.random.default_rng(2).normal(size=(3, 4))], [np.zeros(4)])
    x = np.array([[1.0, -0.5, 2.0]])
    probs, _ = forward(model, x)
    _, grads = loss_and_gradients(model, x, [3])
    delta = probs[0] - np.eye(4)[3]
    assert np.allclose(grads.weights[0], np.outer(x[0], delta), atol=1e-14)
    assert np.allclose(grads.biases[0], delta, atol=1e-14)


def test_sgd_step_rejects_label_count_mismatch():
    model = MlpModel.build(2, 2, hidden_dims=(3,), seed=0)
    with pytest.raises(ShapeError):
        sgd_step(model, np.zeros((3, 2)), [0, 1], OptimizerState(lr0=0.1, total_steps=1))


def test_divergence_raises_numeric_error_with_layer():
    model = MlpModel.zeros((2, 2))
    with pytest.raises(NumericError) as info:
        sgd_step(model, [[1e200, 1e200]], [0], OptimizerState(lr0=1e200, total_steps=1))
    assert info.value.layer_index == 0
