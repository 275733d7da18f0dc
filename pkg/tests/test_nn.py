import math

import numpy as np
import pytest

from casemark import nn
from casemark.errors import MissingCacheError, ShapeError
from tests import conftest


def test_softmax_xent_values():
    """softmax_xent gives -log softmax(logits)[target] and softmax - onehot as gradient"""
    test_data = [
        # logits, target, expected loss
        (np.zeros(30), 4, math.log(30)),
        (np.array([0.0, 0.0]), 1, math.log(2)),
        (np.array([1000.0, 0.0]), 0, 0.0),
        (np.array([2.0, 1.0, 0.1]), 0, 0.4170300162778335),
    ]

    for logits, target, expected in test_data:
        loss, grad = nn.softmax_xent(logits, target)
        onehot = np.eye(len(logits))[target]
        assert loss == pytest.approx(expected, abs=1e-9)
        np.testing.assert_allclose(grad, nn.softmax(logits) - onehot, atol=1e-12)


def test_softmax_xent_large_logits_are_finite():
    """softmax_xent does not overflow on very large logits"""
    loss, grad = nn.softmax_xent(np.array([1e4, -1e4, 0.0]), 1)
    assert np.isfinite(loss)
    assert np.all(np.isfinite(grad))


def test_softmax_xent_weights_mask_rows():
    """a zero row weight removes that row from the loss and the gradient"""
    logits = np.array([[1.0, 2.0, 3.0], [0.5, -0.5, 0.0]])
    loss, grad = nn.softmax_xent(logits, np.array([2, 0]), np.array([1.0, 0.0]))
    single_loss, single_grad = nn.softmax_xent(logits[0], 2)

    assert loss == pytest.approx(single_loss)
    np.testing.assert_allclose(grad[0], single_grad)
    np.testing.assert_array_equal(grad[1], np.zeros(3))


def test_softmax_xent_rejects_bad_input():
    """empty logits and out-of-range targets raise ShapeError"""
    test_data = [
        # logits, target
        (np.zeros(0), 0),
        (np.zeros(3), 3),
        (np.zeros(3), -1),
        (np.zeros((2, 3)), np.array([0, 1, 2])),
    ]

    for logits, target in test_data:
        with pytest.raises(ShapeError):
            nn.softmax_xent(logits, target)


def test_softmax_xent_gradient():
    """the analytic softmax_xent gradient matches central differences"""
    rng = nn.make_rng(11)
    for _ in range(20):
        logits = rng.normal(size=(3, 7))
        targets = rng.integers(7, size=3)
        weights = rng.uniform(-1, 1, size=3)
        _, analytic = nn.softmax_xent(logits, targets, weights)
        numeric = conftest.numerical_grad(
            lambda: nn.softmax_xent(logits, targets, weights)[0], logits
        )
        conftest.assert_grad_close(analytic, numeric)


def test_entropy_gradient():
    """entropy_grad returns the gradient of the softmax entropy"""
    rng = nn.make_rng(5)
    logits = rng.normal(size=(2, 6))
    _, analytic = nn.entropy_grad(logits)
    numeric = conftest.numerical_grad(lambda: float(np.sum(nn.entropy_grad(logits)[0])), logits)
    conftest.assert_grad_close(analytic, numeric)


def test_sigmoid_is_stable():
    """sigmoid saturates without warnings at extreme inputs"""
    values = nn.sigmoid(np.array([-1e4, 0.0, 1e4]))
    np.testing.assert_allclose(values, [0.0, 0.5, 1.0])


def test_gru_step_zero_weights():
    """with all-zero weights z is 0.5 and h̃ is 0, so h' = 0.5 h"""
    cell = nn.GruParams(3, 4, nn.make_rng(0))
    for p in cell.params():
        p.value.fill(0.0)

    h = np.array([0.2, -0.4, 1.0, 0.0])
    h_next, cache = nn.gru_step(np.ones(3), h, cell)

    np.testing.assert_allclose(h_next, 0.5 * h)
    np.testing.assert_allclose(cache.z, 0.5)
    np.testing.assert_allclose(cache.h_tilde, 0.0)


def test_gru_step_from_zero_hidden():
    """with h = 0, zero U matrices and zero biases, h' = σ(W_z x) ⊙ tanh(W_h x)"""
    rng = nn.make_rng(13)
    cell = nn.GruParams(3, 4, rng, init_scale=0.8)
    for p in (cell.U_z, cell.U_r, cell.U_h, cell.b_z, cell.b_r, cell.b_h):
        p.value.fill(0.0)
    x = rng.normal(size=(5, 3))

    h_next, _ = nn.gru_step(x, np.zeros((5, 4)), cell)

    expected = nn.sigmoid(x @ cell.W_z.value.T) * np.tanh(x @ cell.W_h.value.T)
    np.testing.assert_allclose(h_next, expected, rtol=1e-12)


def test_gru_step_shape_errors():
    """gru_step rejects inputs whose sizes do not match the cell"""
    cell = nn.GruParams(3, 4, nn.make_rng(0))
    test_data = [
        # x, h
        (np.ones(2), np.zeros(4)),
        (np.ones(3), np.zeros(5)),
        (np.ones((2, 3)), np.zeros((3, 4))),
    ]

    for x, h in test_data:
        with pytest.raises(ShapeError):
            nn.gru_step(x, h, cell)


def test_gru_backward_needs_cache():
    """gru_backward without a forward cache raises MissingCacheError"""
    cell = nn.GruParams(3, 4, nn.make_rng(0))
    with pytest.raises(MissingCacheError):
        nn.gru_backward(None, np.ones(4), cell)


def test_gru_backward_gradients():
    """gru_backward matches central differences for inputs, hidden state and weights"""
    rng = nn.make_rng(3)
    cell = nn.GruParams(3, 4, rng, init_scale=0.8)
    x = rng.normal(size=(2, 3))
    h = rng.normal(size=(2, 4))
    upstream = rng.normal(size=(2, 4))

    def loss():
        out, _ = nn.gru_step(x, h, cell)
        return float(np.sum(out * upstream))

    _, cache = nn.gru_step(x, h, cell)
    dx, dh = nn.gru_backward(cache, upstream, cell)

    conftest.assert_grad_close(dx, conftest.numerical_grad(loss, x))
    conftest.assert_grad_close(dh, conftest.numerical_grad(loss, h))
    for p in cell.params():
        conftest.assert_grad_close(p.grad, conftest.numerical_grad(loss, p.value))


def test_linear_and_embedding_gradients():
    """Linear and Embedding backward passes match central differences"""
    rng = nn.make_rng(8)
    layer = nn.Linear(4, 3, rng, init_scale=0.5)
    table = nn.Embedding(5, 4, rng, init_scale=0.5)
    ids = np.array([1, 3, 1])
    upstream = rng.normal(size=(3, 3))

    def loss():
        return float(np.sum(layer.forward(table.forward(ids)) * upstream))

    x = table.forward(ids)
    dx = layer.backward(x, upstream)
    table.backward(ids, dx)

    for p in layer.params() + table.params():
        conftest.assert_grad_close(p.grad, conftest.numerical_grad(loss, p.value))


def test_embedding_score_gradient():
    """scoring a batch against embedding rows backpropagates into the batch and the rows"""
    rng = nn.make_rng(14)
    table = nn.Embedding(6, 3, rng, init_scale=0.5)
    x = rng.normal(size=(4, 3))
    rows = np.array([2, 3, 4, 5])
    upstream = rng.normal(size=(4, 4))

    def loss():
        return float(np.sum(table.score(x, rows) * upstream))

    np.testing.assert_allclose(table.score(x, rows), x @ table.table.value[2:].T)
    dx = table.score_backward(x, rows, upstream)

    conftest.assert_grad_close(dx, conftest.numerical_grad(loss, x))
    conftest.assert_grad_close(table.table.grad, conftest.numerical_grad(loss, table.table.value))
    np.testing.assert_array_equal(table.table.grad[:2], 0.0)


def test_embedding_rejects_unknown_ids():
    """looking up an id outside the table raises ShapeError"""
    table = nn.Embedding(5, 2, nn.make_rng(0))
    with pytest.raises(ShapeError):
        table.forward(np.array([0, 5]))


def test_param_accumulate_checks_shape():
    """a gradient of the wrong shape raises ShapeError"""
    p = nn.Param(np.zeros((2, 3)), "w")
    with pytest.raises(ShapeError):
        p.accumulate(np.zeros((3, 2)))


def test_adam_first_step():
    """the first Adam step moves every weight by lr against the gradient sign"""
    test_data = [
        # value, grad, lr, expected
        (np.array([1.0, -2.0]), np.array([0.5, -3.0]), 0.1, np.array([0.9, -1.9])),
        (np.array([0.0]), np.array([1e-3]), 0.01, np.array([-0.01])),
        (np.array([2.0]), np.array([0.0]), 0.1, np.array([2.0])),
    ]

    for value, grad, lr, expected in test_data:
        p = nn.Param(value, "w")
        p.accumulate(grad)
        nn.adam_step(p, lr)
        np.testing.assert_allclose(p.value, expected, atol=1e-6)
        np.testing.assert_array_equal(p.grad, np.zeros_like(value))
        assert p.step_count == 1


def test_adam_matches_scalar_recurrence():
    """100 steps of a constant unit gradient follow the Adam recurrence computed by hand"""
    lr, beta_1, beta_2, epsilon = 0.005, 0.9, 0.999, 1e-8
    p = nn.Param(np.array([0.0]), "w")
    m = v = expected = 0.0
    values = []

    for t in range(1, 101):
        p.accumulate(np.array([1.0]))
        nn.adam_step(p, lr)
        m = beta_1 * m + (1.0 - beta_1)
        v = beta_2 * v + (1.0 - beta_2)
        expected -= lr * (m / (1.0 - beta_1**t)) / (math.sqrt(v / (1.0 - beta_2**t)) + epsilon)
        values.append(float(p.value[0]))

    assert all(b < a for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(expected, abs=1e-6)
    assert p.step_count == 100


def test_adam_partial_step_leaves_others():
    """Adam.step on a subset leaves the other parameters and their gradients alone"""
    first = nn.Param(np.ones(2), "first")
    second = nn.Param(np.ones(2), "second")
    optimizer = nn.Adam([first, second], lr=0.1)
    first.accumulate(np.ones(2))
    second.accumulate(np.ones(2))

    optimizer.step([first])

    np.testing.assert_allclose(first.value, [0.9, 0.9], atol=1e-6)
    np.testing.assert_array_equal(second.value, [1.0, 1.0])
    np.testing.assert_array_equal(second.grad, [1.0, 1.0])
    assert second.step_count == 0


def test_adam_clips_global_norm():
    """with clip_norm the first step size is unchanged but later moments see clipped gradients"""
    p = nn.Param(np.zeros(2), "w")
    optimizer = nn.Adam([p], lr=0.1, clip_norm=1.0)
    p.accumulate(np.array([30.0, 40.0]))
    optimizer.step()
    np.testing.assert_allclose(p.adam_m, 0.1 * np.array([0.6, 0.8]))


def test_make_rng_is_deterministic():
    """generators built from the same seeds give the same draws; different seeds differ"""
    first = nn.make_rng(1, 2).random(5)
    again = nn.make_rng(1, 2).random(5)
    other = nn.make_rng(2, 1).random(5)

    np.testing.assert_array_equal(first, again)
    assert not np.array_equal(first, other)


def test_rng_state_round_trip():
    """a restored generator continues exactly where the snapshot was taken"""
    rng = nn.make_rng(99)
    rng.random(7)
    restored = nn.restore_rng(nn.rng_state(rng))
    np.testing.assert_array_equal(rng.random(4), restored.random(4))


def test_sample_categorical_frequencies():
    """sample_categorical follows softmax(logits) and returns ints for vectors"""
    rng = nn.make_rng(4)
    logits = np.log(np.array([0.2, 0.5, 0.3]))
    draws = sample_many(logits, rng, 20_000)
    frequencies = np.bincount(draws, minlength=3) / draws.size

    np.testing.assert_allclose(frequencies, [0.2, 0.5, 0.3], atol=0.015)
    assert isinstance(nn.sample_categorical(logits, rng), int)


def test_sample_categorical_batched():
    """a (B, V) matrix gives B independent draws, a peaked row always its mode"""
    logits = np.array([[0.0, 50.0, 0.0], [50.0, 0.0, 0.0]])
    picks = nn.sample_categorical(logits, nn.make_rng(0))
    np.testing.assert_array_equal(picks, [1, 0])


def sample_many(logits: np.ndarray, rng: nn.Rng, n: int) -> np.ndarray:
    return nn.sample_categorical(np.tile(logits, (n, 1)), rng)
