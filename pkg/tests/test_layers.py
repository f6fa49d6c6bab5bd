import numpy as np
import pytest

from csiarm.nn.layers import (
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    MaxPool2D,
    ReLU,
    ShapeMismatch,
)

from gradcheck import check_layer_instance


# --- conv forward oracles ----------------------------------------------------


def test_conv_1x1_identity_kernel():
    conv = Conv2D(1, 1, kernel_size=1, dtype=np.float64)
    conv.params["kernel"][...] = 1.0
    x = np.random.default_rng(0).normal(size=(2, 5, 6, 1))
    assert np.allclose(conv.forward(x), x)


def test_conv_hand_computed_2x2():
    conv = Conv2D(1, 1, kernel_size=2, dtype=np.float64)
    conv.params["kernel"][:, :, 0, 0] = [[1.0, 0.0], [0.0, 1.0]]
    x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 2, 2, 1)
    out = conv.forward(x)
    assert out.shape == (1, 1, 1, 1)
    assert out[0, 0, 0, 0] == 5.0  # 1*1 + 4*1


def test_conv_zero_kernel_constant_bias():
    conv = Conv2D(2, 3, kernel_size=3, dtype=np.float64)
    conv.params["kernel"][...] = 0.0
    conv.params["bias"][...] = [1.5, -2.0, 0.25]
    x = np.random.default_rng(1).normal(size=(2, 6, 6, 2))
    out = conv.forward(x)
    assert np.allclose(out, np.broadcast_to([1.5, -2.0, 0.25], out.shape))


def test_conv_output_shape_formula():
    rng = np.random.default_rng(2)
    conv = Conv2D(1, 4, kernel_size=3, stride=2, padding=1, dtype=np.float64)
    out = conv.forward(rng.normal(size=(1, 9, 11, 1)))
    assert out.shape == (1, (9 - 3 + 2) // 2 + 1, (11 - 3 + 2) // 2 + 1, 4)


def test_conv_zero_upstream_zero_grads():
    rng = np.random.default_rng(3)
    conv = Conv2D(1, 2, kernel_size=3, l1=0.0, l2=0.0, dtype=np.float64)
    out = conv.forward(rng.normal(size=(1, 5, 5, 1)))
    gx = conv.backward(np.zeros_like(out))
    assert np.all(gx == 0)
    assert np.all(conv.grads["kernel"] == 0)
    assert np.all(conv.grads["bias"] == 0)


def test_conv_pure_l2_regularizer_gradient():
    rng = np.random.default_rng(4)
    conv = Conv2D(1, 2, kernel_size=3, l1=0.0, l2=0.5, dtype=np.float64)
    out = conv.forward(rng.normal(size=(1, 5, 5, 1)))
    conv.backward(np.zeros_like(out))
    assert np.allclose(conv.grads["kernel"], conv.params["kernel"])  # 2*0.5*k


def test_conv_l1_regularizer_gradient():
    rng = np.random.default_rng(5)
    conv = Conv2D(1, 1, kernel_size=3, l1=0.25, l2=0.0, dtype=np.float64)
    out = conv.forward(rng.normal(size=(1, 5, 5, 1)))
    conv.backward(np.zeros_like(out))
    assert np.allclose(conv.grads["kernel"], 0.25 * np.sign(conv.params["kernel"]))


def test_conv_regularization_loss():
    conv = Conv2D(1, 1, kernel_size=2, l1=0.1, l2=0.2, dtype=np.float64)
    conv.params["kernel"][:, :, 0, 0] = [[1.0, -2.0], [0.5, 0.0]]
    expected = 0.1 * 3.5 + 0.2 * (1 + 4 + 0.25)
    assert np.isclose(conv.regularization_loss(), expected)


def test_conv_shape_mismatches():
    conv = Conv2D(2, 1, kernel_size=3, dtype=np.float64)
    with pytest.raises(ShapeMismatch):
        conv.forward(np.zeros((1, 5, 5, 3)))  # wrong channels
    with pytest.raises(ShapeMismatch):
        conv.forward(np.zeros((1, 2, 5, 2)))  # smaller than kernel
    conv.forward(np.zeros((1, 5, 5, 2)))
    with pytest.raises(ShapeMismatch):
        conv.backward(np.zeros((1, 4, 4, 1)))


# --- maxpool -------------------------------------------------------------------


def test_maxpool_hand_case_and_routing():
    pool = MaxPool2D(2)
    x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 2, 2, 1)
    out = pool.forward(x)
    assert out.reshape(()) == 4.0
    gx = pool.backward(np.full((1, 1, 1, 1), 7.0))
    expected = np.zeros((1, 2, 2, 1))
    expected[0, 1, 1, 0] = 7.0
    assert np.array_equal(gx, expected)


def test_maxpool_tie_first_occurrence():
    pool = MaxPool2D(2)
    x = np.full((1, 2, 2, 1), 3.0)
    pool.forward(x)
    gx = pool.backward(np.ones((1, 1, 1, 1)))
    assert gx[0, 0, 0, 0] == 1.0  # first position in the window
    assert gx.sum() == 1.0


def test_maxpool_gradient_mass_conservation():
    rng = np.random.default_rng(6)
    pool = MaxPool2D(2)
    x = np.full((3, 6, 8, 2), 1.25)
    out = pool.forward(x)
    up = rng.normal(size=out.shape)
    gx = pool.backward(up)
    assert np.isclose(gx.sum(), up.sum())
    # exactly one routed position per window
    assert np.count_nonzero(gx) == up.size


def test_maxpool_output_shape_300x234():
    pool = MaxPool2D(2)
    out = pool.forward(np.zeros((1, 300, 234, 1)))
    assert out.shape == (1, 150, 117, 1)


def test_maxpool_odd_edge_truncated():
    pool = MaxPool2D(2)
    x = np.zeros((1, 5, 5, 1))
    x[0, 4, 4, 0] = 99.0  # lives in the truncated remainder
    out = pool.forward(x)
    assert out.shape == (1, 2, 2, 1)
    assert out.max() == 0.0
    gx = pool.backward(np.ones_like(out))
    assert gx.shape == x.shape
    assert gx[0, 4, 4, 0] == 0.0


def test_maxpool_shape_mismatches():
    pool = MaxPool2D(2)
    with pytest.raises(ShapeMismatch):
        pool.forward(np.zeros((1, 1, 5, 1)))
    pool.forward(np.zeros((1, 4, 4, 1)))
    with pytest.raises(ShapeMismatch):
        pool.backward(np.zeros((1, 3, 3, 1)))


# --- dense / relu / dropout / flatten -------------------------------------------


def test_dense_identity():
    dense = Dense(4, 4, dtype=np.float64)
    dense.params["weight"][...] = np.eye(4)
    dense.params["bias"][...] = 0.0
    x = np.random.default_rng(7).normal(size=(3, 4))
    assert np.allclose(dense.forward(x), x)


def test_dense_shape_mismatch():
    dense = Dense(4, 2, dtype=np.float64)
    with pytest.raises(ShapeMismatch):
        dense.forward(np.zeros((3, 5)))
    dense.forward(np.zeros((3, 4)))
    with pytest.raises(ShapeMismatch):
        dense.backward(np.zeros((3, 3)))


def test_relu_values():
    relu = ReLU()
    out = relu.forward(np.array([-3.0, 0.0, 2.0]))
    assert np.array_equal(out, [0.0, 0.0, 2.0])
    gx = relu.backward(np.array([1.0, 1.0, 1.0]))
    assert np.array_equal(gx, [0.0, 0.0, 1.0])


def test_dropout_p0_identity():
    drop = Dropout(0.0)
    x = np.random.default_rng(8).normal(size=(10, 10))
    assert np.array_equal(drop.forward(x, training=True), x)
    assert np.array_equal(drop.backward(x), x)


def test_dropout_inference_identity():
    drop = Dropout(0.5)
    x = np.random.default_rng(9).normal(size=(10, 10))
    assert np.array_equal(drop.forward(x, training=False), x)


def test_dropout_keep_fraction_monte_carlo():
    p = 0.3
    n = 100_000
    drop = Dropout(p, rng=np.random.default_rng(10))
    out = drop.forward(np.ones(n), training=True)
    kept = np.count_nonzero(out)
    sigma = np.sqrt(n * p * (1 - p))
    assert abs(kept - n * (1 - p)) <= 3 * sigma
    # survivors carry the inverted scale
    assert np.allclose(out[out != 0], 1.0 / (1.0 - p))


def test_dropout_rejects_bad_p():
    with pytest.raises(ValueError):
        Dropout(1.0)


def test_flatten_roundtrip():
    flat = Flatten()
    x = np.random.default_rng(11).normal(size=(2, 3, 4, 5))
    out = flat.forward(x)
    assert out.shape == (2, 60)
    assert np.array_equal(flat.backward(out), x)


# --- finite-difference gradient checks -------------------------------------------


def test_conv_gradients_match_fd():
    rng = np.random.default_rng(100)
    worst = 0.0
    for _ in range(30):
        cin = int(rng.integers(1, 4))
        cout = int(rng.integers(1, 4))
        k = int(rng.integers(1, 4))
        stride = int(rng.integers(1, 3))
        pad = int(rng.integers(0, 2))
        h = int(rng.integers(k + 2, k + 6))
        w = int(rng.integers(k + 2, k + 6))
        conv = Conv2D(cin, cout, k, stride=stride, padding=pad, dtype=np.float64, rng=rng)
        x = rng.normal(size=(int(rng.integers(1, 3)), h, w, cin))
        worst = max(worst, check_layer_instance(conv, x, rng))
    assert worst < 1e-5


def test_maxpool_gradients_match_fd():
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(30):
        pool = MaxPool2D(2)
        x = rng.normal(size=(2, int(rng.integers(4, 9)), int(rng.integers(4, 9)), 2))
        worst = max(worst, check_layer_instance(pool, x, rng, min_abs_input=1e-3))
    assert worst < 1e-5


def test_dense_gradients_match_fd():
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(30):
        dense = Dense(int(rng.integers(2, 9)), int(rng.integers(2, 7)), dtype=np.float64, rng=rng)
        x = rng.normal(size=(int(rng.integers(1, 5)), dense.params["weight"].shape[0]))
        worst = max(worst, check_layer_instance(dense, x, rng))
    assert worst < 1e-5


def test_relu_gradients_match_fd():
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(30):
        x = rng.normal(size=(3, int(rng.integers(2, 10))))
        worst = max(worst, check_layer_instance(ReLU(), x, rng, min_abs_input=1e-3))
    assert worst < 1e-5


def test_dropout_gradients_match_fd():
    rng = np.random.default_rng(104)
    worst = 0.0
    for i in range(30):
        drop = Dropout(0.4)
        x = rng.normal(size=(4, 6))

        def reset(layer, seed=i):
            layer.rng = np.random.default_rng(seed)

        worst = max(worst, check_layer_instance(drop, x, rng, reset=reset))
    assert worst < 1e-5


def test_flatten_gradients_match_fd():
    rng = np.random.default_rng(105)
    worst = 0.0
    for _ in range(10):
        x = rng.normal(size=(2, 3, 2, 2))
        worst = max(worst, check_layer_instance(Flatten(), x, rng))
    assert worst < 1e-5
