"""
Small dense networks in numpy with exact reverse-mode gradients.

Parameters are kept as a flat list ``[W0, b0, W1, b1, ...]`` with ``W`` shaped (out, in);
gradients come back in the same order. Inputs may be a single vector or a batch (n, in).
"""
import json
import struct

import numpy as np

from skyrsma.constants_utils import ShapeMismatch, NoForwardCache, BadConfig

ACTIVATIONS = ("linear", "relu", "tanh")
CHECKPOINT_MAGIC = b"SKYRSMA1"


def _activate(kind, z):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(kind, z, a, upstream):
    if kind == "relu":
        return upstream * (z > 0)
    if kind == "tanh":
        return upstream * (1.0 - a ** 2)
    return upstream


class ForwardCache:
    def __init__(self, x, single):
        self.x = x
        self.single = single
        self.pre = []
        self.post = []


class DenseNet:
    def __init__(self, layer_dims, hidden_activation="tanh", output_activation="linear", rng=None, seed=None,
                 zero=False):
        if len(layer_dims) < 2 or any(int(d) < 1 for d in layer_dims):
            raise BadConfig("Layer dims {} invalid".format(layer_dims))
        if hidden_activation not in ("relu", "tanh") or output_activation not in ("linear", "tanh"):
            raise BadConfig("Unsupported activations {}/{}".format(hidden_activation, output_activation))
        self.layer_dims = tuple(int(d) for d in layer_dims)
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation
        rng = rng if rng is not None else np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.layer_dims[:-1], self.layer_dims[1:]):
            if zero:
                self.weights.append(np.zeros((fan_out, fan_in)))
                self.biases.append(np.zeros(fan_out))
            else:
                bound = 1.0 / np.sqrt(fan_in)
                self.weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
                self.biases.append(rng.uniform(-bound, bound, size=fan_out))
        self.cache = None

    @property
    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @property
    def input_dim(self):
        return self.layer_dims[0]

    @property
    def output_dim(self):
        return self.layer_dims[-1]

    def activation(self, layer):
        return self.output_activation if layer == len(self.weights) - 1 else self.hidden_activation

    def forward_cached(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x2 = np.atleast_2d(x)
        if x2.ndim != 2 or x2.shape[1] != self.input_dim:
            raise ShapeMismatch("Input of shape {} for a net expecting {}".format(x.shape, self.input_dim))
        cache = ForwardCache(x2, single)
        a = x2
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            a = _activate(self.activation(layer), z)
            cache.pre.append(z)
            cache.post.append(a)
        return (a[0] if single else a), cache

    def forward(self, x):
        out, self.cache = self.forward_cached(x)
        return out

    def backward(self, upstream, cache=None):
        """
        Gradients of ``sum(upstream * output)``.

        :return: (parameter gradients in ``params`` order, input gradient)
        """
        cache = cache if cache is not None else self.cache
        if cache is None:
            raise NoForwardCache("backward() called before forward()")
        g = np.atleast_2d(np.asarray(upstream, dtype=float))
        if g.shape != cache.post[-1].shape:
            raise ShapeMismatch("Upstream gradient {} does not match output {}".format(g.shape, cache.post[-1].shape))
        grads = [None] * (2 * len(self.weights))
        for layer in reversed(range(len(self.weights))):
            g = _activation_grad(self.activation(layer), cache.pre[layer], cache.post[layer], g)
            inputs = cache.post[layer - 1] if layer > 0 else cache.x
            grads[2 * layer] = g.T @ inputs
            grads[2 * layer + 1] = g.sum(axis=0)
            g = g @ self.weights[layer]
        return grads, (g[0] if cache.single else g)

    def copy(self):
        twin = DenseNet.__new__(DenseNet)
        twin.layer_dims = self.layer_dims
        twin.hidden_activation = self.hidden_activation
        twin.output_activation = self.output_activation
        twin.weights = [w.copy() for w in self.weights]
        twin.biases = [b.copy() for b in self.biases]
        twin.cache = None
        return twin


def forward(net, x):
    return net.forward(x)


def backward(net, x, upstream_grad):
    """Runs a fresh forward pass on ``x`` when the net holds no cache for it."""
    if x is not None:
        net.forward(x)
    return net.backward(upstream_grad)


def add_grads(total, grads):
    if total is None:
        return [g.copy() for g in grads]
    for t, g in zip(total, grads):
        t += g
    return total


class Optimizer:
    def __init__(self, kind="adam", learning_rate=5e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        if kind not in ("sgd", "adam"):
            raise BadConfig("Unknown optimizer {}".format(kind))
        if learning_rate <= 0:
            raise BadConfig("Learning rate must be positive")
        self.kind = kind
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params, grads):
        if len(params) != len(grads):
            raise ShapeMismatch("{} gradients for {} parameters".format(len(grads), len(params)))
        if self.kind == "sgd":
            for p, g in zip(params, grads):
                p -= self.learning_rate * g
            return
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        correction1 = 1 - self.beta1 ** self.t
        correction2 = 1 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + self.eps)


def apply_update(opt, net, grads):
    opt.step(net.params, grads)
    return net


def grad_check(params, loss_fn, analytic, step=1e-5, max_checks=None, rng=None):
    """
    Central-difference check of ``analytic`` against ``loss_fn()``.

    ``params`` (or a net's ``params``) are perturbed in place and restored. Arrays larger
    than ``max_checks`` are checked on a random subsample of entries. Returns
    max |a - n| / max(|a|_inf, |n|_inf), the error relative to the gradient scale.
    """
    params = params.params if hasattr(params, "params") else params
    rng = rng if rng is not None else np.random.default_rng(0)
    worst_diff = 0.0
    scale = 1e-12
    for p, a in zip(params, analytic):
        flat = p.reshape(-1)
        grad = np.asarray(a).reshape(-1)
        entries = np.arange(flat.size)
        if max_checks is not None and flat.size > max_checks:
            entries = np.sort(rng.choice(flat.size, max_checks, replace=False))
        for j in entries:
            original = flat[j]
            flat[j] = original + step
            plus = loss_fn()
            flat[j] = original - step
            minus = loss_fn()
            flat[j] = original
            numeric = (plus - minus) / (2 * step)
            worst_diff = max(worst_diff, abs(numeric - grad[j]))
            scale = max(scale, abs(numeric), abs(grad[j]))
    return worst_diff / scale


def save_networks(path, nets, sidecar=None):
    """
    Writes named networks to one binary checkpoint and an optional JSON sidecar.

    Layout: magic, uint32 count, then per net uint16 name length, name, uint8 hidden and
    output activation codes, uint32 dim count, uint32 dims, then W (row-major, out x in)
    and b of every layer as little-endian float64.
    """
    codes = {name: n for n, name in enumerate(ACTIVATIONS)}
    with open(path, "wb") as file:
        file.write(CHECKPOINT_MAGIC)
        file.write(struct.pack("<I", len(nets)))
        for name, net in nets.items():
            encoded = name.encode("utf-8")
            file.write(struct.pack("<H", len(encoded)))
            file.write(encoded)
            file.write(struct.pack("<BB", codes[net.hidden_activation], codes[net.output_activation]))
            file.write(struct.pack("<I", len(net.layer_dims)))
            file.write(np.asarray(net.layer_dims, dtype="<u4").tobytes())
            for w, b in zip(net.weights, net.biases):
                file.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
                file.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
    if sidecar is not None:
        with open(sidecar_path(path), "w", encoding="utf-8") as file:
            json.dump(sidecar, file, indent=2, sort_keys=True)


def sidecar_path(path):
    return path[:-4] + ".json" if path.endswith(".bin") else path + ".json"


def load_networks(path):
    with open(path, "rb") as file:
        data = file.read()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise BadConfig("{} is not a network checkpoint".format(path))
    offset = len(CHECKPOINT_MAGIC)

    def take(fmt):
        nonlocal offset
        values = struct.unpack_from(fmt, data, offset)
        offset += struct.calcsize(fmt)
        return values

    nets = {}
    count, = take("<I")
    for _ in range(count):
        name_len, = take("<H")
        name = data[offset:offset + name_len].decode("utf-8")
        offset += name_len
        hidden, output = take("<BB")
        n_dims, = take("<I")
        dims = np.frombuffer(data, dtype="<u4", count=n_dims, offset=offset).tolist()
        offset += 4 * n_dims
        net = DenseNet(dims, ACTIVATIONS[hidden], ACTIVATIONS[output], zero=True)
        for layer, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            w = np.frombuffer(data, dtype="<f8", count=fan_in * fan_out, offset=offset)
            offset += 8 * fan_in * fan_out
            b = np.frombuffer(data, dtype="<f8", count=fan_out, offset=offset)
            offset += 8 * fan_out
            net.weights[layer] = w.reshape(fan_out, fan_in).astype(float)
            net.biases[layer] = b.astype(float)
        nets[name] = net
    return nets


def sidecar(path):
    with open(sidecar_path(path), encoding="utf-8") as file:
        return json.load(file)
