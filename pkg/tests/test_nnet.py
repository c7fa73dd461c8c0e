import numpy as np
import pytest

from ris_semcom.nnet import (
    AdamState,
    DenseNetwork,
    finite_diff_check,
    forward,
    init_network,
    load_network,
    save_network,
    train_batch,
)


def test_parameter_count_4_5_3():
    net = init_network([4, 5, 3], ["relu", "linear"], np.random.default_rng(0))
    assert net.n_params == 4 * 5 + 5 + 5 * 3 + 3 == 43


def test_zero_scale_override_gives_zero_output():
    net = init_network([4, 6, 2], ["linear", "linear"], np.random.default_rng(0), weight_scale=0.0)
    assert np.all(forward(net, np.ones(4)) == 0.0)


def test_init_is_deterministic():
    a = init_network([3, 7, 2], ["relu", "linear"], np.random.default_rng(5))
    b = init_network([3, 7, 2], ["relu", "linear"], np.random.default_rng(5))
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)


def test_identity_linear_layer_passthrough():
    net = DenseNetwork(
        weights=[np.eye(3)], biases=[np.zeros(3)], activations=["linear"]
    )
    x = np.array([0.3, -2.0, 5.0])
    assert np.array_equal(forward(net, x), x)


def test_softmax_symmetry_and_normalization():
    net = DenseNetwork(
        weights=[np.zeros((5, 5))], biases=[np.zeros(5)], activations=["softmax"]
    )
    out = forward(net, np.ones(5))
    assert np.allclose(out, 0.2)
    rng = np.random.default_rng(0)
    net2 = init_network([4, 5], ["softmax"], rng)
    out2 = forward(net2, rng.standard_normal((16, 4)))
    assert np.allclose(out2.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(out2 > 0)


def test_relu_clamps():
    net = DenseNetwork(weights=[np.eye(2)], biases=[np.zeros(2)], activations=["relu"])
    assert np.array_equal(forward(net, np.array([-1.0, 2.0])), [0.0, 2.0])


def test_sigmoid_range():
    rng = np.random.default_rng(1)
    net = init_network([6, 4], ["sigmoid"], rng)
    out = forward(net, rng.standard_normal((32, 6)))
    assert np.all((out > 0) & (out < 1))


def test_forward_rejects_wrong_length():
    net = init_network([4, 2], ["linear"], np.random.default_rng(0))
    with pytest.raises(ValueError):
        forward(net, np.ones(5))


def test_sigmoid_only_on_final_layer():
    with pytest.raises(ValueError):
        init_network([4, 4, 2], ["sigmoid", "linear"], np.random.default_rng(0))


def test_zero_learning_rate_keeps_parameters():
    rng = np.random.default_rng(2)
    net = init_network([3, 8, 2], ["relu", "linear"], rng)
    snapshot = [w.copy() for w in net.weights]
    state = AdamState.for_network(net)
    loss = train_batch(
        net,
        rng.standard_normal((8, 3)),
        (np.zeros(8, int), np.ones(8)),
        "mse_on_selected_output",
        state,
        0.0,
    )
    assert loss > 0
    for w, snap in zip(net.weights, snapshot):
        assert np.array_equal(w, snap)


def test_xor_fits_within_5000_steps():
    rng = np.random.default_rng(0)
    net = init_network([2, 8, 8, 1], ["relu", "relu", "sigmoid"], rng)
    state = AdamState.for_network(net)
    x = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], float)
    t = np.array([[0.0], [1.0], [1.0], [0.0]])
    for _ in range(5000):
        train_batch(net, x, t, "binary_cross_entropy", state, 0.01)
    assert np.max(np.abs(forward(net, x) - t)) <= 0.1


def test_convex_descent_is_monotone():
    rng = np.random.default_rng(3)
    net = init_network([4, 1], ["linear"], rng)
    state = AdamState.for_network(net)
    x = rng.standard_normal((1, 4))
    target = (np.zeros(1, int), np.array([2.0]))
    losses = []
    for _ in range(100):
        losses.append(train_batch(net, x, target, "mse_on_selected_output", state, 1e-2))
    assert all(a > b for a, b in zip(losses, losses[1:]))


def test_update_determinism():
    nets = []
    for _ in range(2):
        rng = np.random.default_rng(9)
        net = init_network([5, 16, 3], ["relu", "linear"], rng)
        state = AdamState.for_network(net)
        for _ in range(50):
            x = rng.standard_normal((8, 5))
            idx = rng.integers(0, 3, 8)
            train_batch(net, x, (idx, rng.standard_normal(8)), "mse_on_selected_output", state, 1e-3)
        nets.append(net)
    for wa, wb in zip(nets[0].weights, nets[1].weights):
        assert np.array_equal(wa, wb)


def test_non_finite_gradient_aborts_step():
    net = init_network([2, 1], ["linear"], np.random.default_rng(0))
    state = AdamState.for_network(net)
    snapshot = [w.copy() for w in net.weights]
    with pytest.raises(FloatingPointError):
        train_batch(
            net,
            np.array([[1.0, np.inf]]),
            (np.zeros(1, int), np.zeros(1)),
            "mse_on_selected_output",
            state,
            1e-3,
        )
    for w, snap in zip(net.weights, snapshot):
        assert np.array_equal(w, snap)


# ------------------------------------------------ gradient verification


def nudged_inputs(rng, net, n=4):
    """Inputs pushed away from relu kinks so finite differences are clean."""
    x = rng.standard_normal((n, net.weights[0].shape[0]))
    return x + 1e-3 * np.sign(x)


def test_finite_diff_linear_mse():
    rng = np.random.default_rng(4)
    net = init_network([6, 3], ["linear"], rng)
    x = rng.standard_normal((4, 6))
    err = finite_diff_check(net, x, (rng.integers(0, 3, 4), rng.standard_normal(4)), "mse_on_selected_output")
    assert err <= 1e-7


def test_finite_diff_three_layer_relu():
    rng = np.random.default_rng(5)
    net = init_network([8, 16, 16, 5], ["relu", "relu", "linear"], rng)
    x = nudged_inputs(rng, net)
    err = finite_diff_check(net, x, (rng.integers(0, 5, 4), rng.standard_normal(4)), "mse_on_selected_output")
    assert err <= 1e-4


def test_finite_diff_softmax_cross_entropy():
    rng = np.random.default_rng(6)
    net = init_network([8, 16, 5], ["relu", "softmax"], rng)
    x = nudged_inputs(rng, net)
    err = finite_diff_check(net, x, rng.integers(0, 5, 4), "cross_entropy")
    assert err <= 1e-5


def test_finite_diff_sigmoid_bce():
    rng = np.random.default_rng(7)
    net = init_network([8, 16, 4], ["relu", "sigmoid"], rng)
    x = nudged_inputs(rng, net)
    err = finite_diff_check(net, x, rng.random((4, 4)), "binary_cross_entropy")
    assert err <= 1e-5


def test_finite_diff_rejects_oversized_network():
    rng = np.random.default_rng(8)
    net = init_network([200, 200, 5], ["relu", "linear"], rng)
    with pytest.raises(ValueError):
        finite_diff_check(net, rng.standard_normal((1, 200)), (np.zeros(1, int), np.zeros(1)), "mse_on_selected_output")


# ---------------------------------------------------------- persistence


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(10)
    net = init_network([7, 12, 4], ["relu", "sigmoid"], rng)
    path = str(tmp_path / "net.bin")
    save_network(net, path)
    other = load_network(path)
    assert other.activations == net.activations
    for wa, wb in zip(net.weights, other.weights):
        assert np.array_equal(wa, wb)
    for ba, bb in zip(net.biases, other.biases):
        assert np.array_equal(ba, bb)
    x = rng.standard_normal(7)
    assert np.array_equal(forward(net, x), forward(other, x))
