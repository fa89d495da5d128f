import numpy as np
import pytest

from skyrsma import nn
from skyrsma.constants_utils import ShapeMismatch, NoForwardCache, BadConfig
from skyrsma.nn import DenseNet, Optimizer


def test_forward_shapes():
    net = DenseNet([4, 6, 3], seed=0)
    x = np.random.default_rng(1).standard_normal((5, 4))
    assert net.forward(x).shape == (5, 3)
    assert net.forward(x[0]).shape == (3,)
    np.testing.assert_allclose(net.forward(x[0]), net.forward(x)[0])


@pytest.mark.parametrize("hidden,output", [("tanh", "linear"), ("tanh", "tanh")])
def test_parameter_gradients(hidden, output):
    rng = np.random.default_rng(2)
    net = DenseNet([3, 5, 4, 2], hidden, output, rng=rng)
    x = rng.standard_normal((6, 3))
    w = rng.standard_normal((6, 2))
    net.forward(x)
    grads, _ = net.backward(w)
    err = nn.grad_check(net, lambda: float(np.sum(w * net.forward(x))), grads)
    assert err < 1e-6


def test_input_gradient():
    rng = np.random.default_rng(3)
    net = DenseNet([3, 5, 1], rng=rng)
    x = rng.standard_normal(3)
    _, dx = nn.backward(net, x, np.ones(1))
    err = nn.grad_check([x], lambda: float(net.forward(x)[0]), [dx])
    assert err < 1e-6


def test_backward_needs_forward():
    net = DenseNet([2, 3, 1], seed=0)
    with pytest.raises(NoForwardCache):
        net.backward(np.ones(1))


def test_shape_mismatch():
    net = DenseNet([2, 3, 1], seed=0)
    with pytest.raises(ShapeMismatch):
        net.forward(np.ones(3))
    net.forward(np.ones((4, 2)))
    with pytest.raises(ShapeMismatch):
        net.backward(np.ones((4, 2)))


def test_bad_layers():
    with pytest.raises(BadConfig):
        DenseNet([3])
    with pytest.raises(BadConfig):
        DenseNet([3, 2], hidden_activation="sigmoid")


def test_copy_is_independent():
    net = DenseNet([2, 3, 1], seed=0)
    twin = net.copy()
    twin.weights[0] += 1.0
    assert not np.allclose(net.weights[0], twin.weights[0])


def test_sgd_step():
    p = [np.array([1.0, 2.0])]
    Optimizer("sgd", 0.1).step(p, [np.array([1.0, -1.0])])
    np.testing.assert_allclose(p[0], [0.9, 2.1])


def test_adam_first_step_has_learning_rate_size():
    p = [np.ones(3)]
    Optimizer("adam", 1e-3).step(p, [np.array([1.0, -2.0, 0.5])])
    np.testing.assert_allclose(p[0], [1 - 1e-3, 1 + 1e-3, 1 - 1e-3], atol=1e-9)


def test_optimizer_errors():
    with pytest.raises(BadConfig):
        Optimizer("rmsprop")
    with pytest.raises(BadConfig):
        Optimizer("sgd", 0.0)
    with pytest.raises(ShapeMismatch):
        Optimizer("sgd").step([np.ones(2)], [])


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    nets = {"actor": DenseNet([4, 8, 3], "relu", "linear", rng=rng), "critic": DenseNet([5, 2, 1], rng=rng)}
    path = str(tmp_path / "checkpoint.bin")
    nn.save_networks(path, nets, sidecar={"agent": "gdrs", "seed": 3})
    loaded = nn.load_networks(path)
    assert list(loaded) == ["actor", "critic"]
    assert loaded["actor"].hidden_activation == "relu"
    x = rng.standard_normal((3, 4))
    np.testing.assert_array_equal(loaded["actor"].forward(x), nets["actor"].forward(x))
    for a, b in zip(loaded["critic"].params, nets["critic"].params):
        np.testing.assert_array_equal(a, b)
    assert nn.sidecar(path) == {"agent": "gdrs", "seed": 3}
    assert nn.sidecar_path(path).endswith("checkpoint.json")


def test_load_rejects_foreign_files(tmp_path):
    path = tmp_path / "bogus.bin"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(BadConfig):
        nn.load_networks(str(path))


def test_module_forward_matches_the_net():
    net = DenseNet([3, 4, 2], seed=5)
    x = np.random.default_rng(5).standard_normal((2, 3))
    np.testing.assert_array_equal(nn.forward(net, x), net.forward(x))


def test_apply_update_with_sgd():
    net = DenseNet([1, 1], zero=True)
    net.weights[0][:] = 2.0
    grads = [np.full_like(p, 0.5) for p in net.params]
    assert nn.apply_update(Optimizer("sgd", 1.0), net, grads) is net
    np.testing.assert_allclose(net.weights[0], [[1.5]])
    np.testing.assert_allclose(net.biases[0], [-0.5])
