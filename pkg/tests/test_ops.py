import numpy as np
import pytest

from gradcheck import max_rel_err, numeric_grad
from vortexseg.ops import (
    Adam,
    global_maxpool,
    global_maxpool_backward,
    leaky_relu,
    leaky_relu_backward,
    pointwise_linear,
    pointwise_linear_backward,
    softmax_cross_entropy,
)


def test_linear_identity():
    x = np.arange(12.0).reshape(4, 3)
    y, _ = pointwise_linear(x, np.eye(3), np.zeros(3))
    assert np.array_equal(y, x)


def test_linear_bias_gradient_is_ones():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(5, 3))
    w = rng.normal(size=(3, 4))
    _, cache = pointwise_linear(x, w, np.zeros(4))
    _, _, db = pointwise_linear_backward(cache, np.ones((5, 4)))
    assert np.array_equal(db, np.full(4, 5.0))  # d sum(y) / d b


def test_linear_shape_mismatch():
    with pytest.raises(ValueError):
        pointwise_linear(np.zeros((2, 3)), np.zeros((4, 5)), np.zeros(5))


def test_linear_gradcheck():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(6, 4))
    w = rng.normal(size=(4, 3))
    b = rng.normal(size=3)
    g = rng.normal(size=(6, 3))  # fixed probe: loss = sum(y * g)

    def loss():
        return float((pointwise_linear(x, w, b)[0] * g).sum())

    _, cache = pointwise_linear(x, w, b)
    dx, dw, db = pointwise_linear_backward(cache, g)
    assert max_rel_err(dx, numeric_grad(loss, x)) < 1e-6
    assert max_rel_err(dw, numeric_grad(loss, w)) < 1e-6
    assert max_rel_err(db, numeric_grad(loss, b)) < 1e-6


def test_leaky_relu_values():
    x = np.array([-1.0, 0.0, 2.0])
    y, _ = leaky_relu(x)
    assert y.tolist() == [-0.2, 0.0, 2.0]


def test_leaky_relu_gradcheck_away_from_zero():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(5, 4))
    x[np.abs(x) < 0.05] = 0.5  # keep finite differences off the kink
    g = rng.normal(size=(5, 4))

    def loss():
        return float((leaky_relu(x)[0] * g).sum())

    _, cache = leaky_relu(x)
    dx = leaky_relu_backward(cache, g)
    assert max_rel_err(dx, numeric_grad(loss, x)) < 1e-6


def test_maxpool_single_point_identity():
    x = np.array([[3.0, -1.0, 2.0]])
    y, _ = global_maxpool(x)
    assert y.tolist() == [3.0, -1.0, 2.0]


def test_maxpool_routes_gradient_to_dominating_point():
    x = np.array([[5.0, 5.0], [1.0, 2.0], [0.0, 1.0]])
    y, cache = global_maxpool(x)
    dx = global_maxpool_backward(cache, np.array([1.0, 1.0]))
    assert y.tolist() == [5.0, 5.0]
    assert dx.tolist() == [[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]]


def test_maxpool_tie_goes_to_lowest_index():
    x = np.array([[2.0], [2.0]])
    _, cache = global_maxpool(x)
    dx = global_maxpool_backward(cache, np.array([7.0]))
    assert dx.tolist() == [[7.0], [0.0]]


def test_maxpool_gradcheck():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(5, 4))
    g = rng.normal(size=4)

    def loss():
        return float((global_maxpool(x)[0] * g).sum())

    _, cache = global_maxpool(x)
    dx = global_maxpool_backward(cache, g)
    assert max_rel_err(dx, numeric_grad(loss, x)) < 1e-6


def test_maxpool_empty_rejected():
    with pytest.raises(ValueError):
        global_maxpool(np.zeros((0, 3)))


def test_softmax_xent_uniform_logits():
    loss, grad = softmax_cross_entropy(np.zeros((4, 3)), np.array([0, 1, 2, 0]))
    assert loss == pytest.approx(np.log(3.0), rel=1e-12)
    # gradient rows: (1/3 - onehot)/n
    assert grad[0].tolist() == pytest.approx([(1 / 3 - 1) / 4, 1 / 12, 1 / 12])


def test_softmax_xent_peaked_logits():
    logits = np.array([[30.0, 0.0, 0.0], [0.0, 30.0, 0.0]])
    loss, _ = softmax_cross_entropy(logits, np.array([0, 1]))
    assert loss < 1e-12


def test_softmax_xent_label_out_of_range():
    with pytest.raises(ValueError):
        softmax_cross_entropy(np.zeros((2, 3)), np.array([0, 3]))


def test_softmax_xent_gradcheck():
    rng = np.random.default_rng(4)
    logits = rng.normal(size=(4, 3))
    labels = np.array([0, 2, 1, 2])

    def loss():
        return softmax_cross_entropy(logits, labels)[0]

    _, grad = softmax_cross_entropy(logits, labels)
    assert max_rel_err(grad, numeric_grad(loss, logits)) < 1e-6


def test_adam_first_step_magnitude():
    params = {"p": np.array([1.0, -2.0, 0.5])}
    grads = {"p": np.array([0.3, -0.7, 1.9])}
    adam = Adam(lr=0.001)
    adam.step(params, grads)
    # first step: m_hat = g, v_hat = g^2, update = -lr * g/(|g| + ~0)
    expected = np.array([1.0, -2.0, 0.5]) - 0.001 * np.sign([0.3, -0.7, 1.9])
    assert np.allclose(params["p"], expected, atol=1e-6)
    assert adam.t == 1


def test_adam_zero_gradient_keeps_params():
    params = {"p": np.array([1.0, -2.0])}
    adam = Adam()
    adam.step(params, {"p": np.zeros(2)})
    assert params["p"].tolist() == [1.0, -2.0]
    assert adam.t == 1


def test_adam_two_step_hand_recurrence():
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
    theta = 2.0
    m = v = 0.0
    grads = [0.4, -0.3]
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)

    params = {"p": np.array([2.0])}
    adam = Adam(lr=lr)
    adam.step(params, {"p": np.array([grads[0]])})
    adam.step(params, {"p": np.array([grads[1]])})
    assert params["p"][0] == pytest.approx(theta, rel=1e-12)


def test_adam_shape_mismatch():
    adam = Adam()
    with pytest.raises(ValueError):
        adam.step({"p": np.zeros(3)}, {"p": np.zeros(4)})
