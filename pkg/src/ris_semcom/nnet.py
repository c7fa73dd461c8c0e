"""Minimal dense-network engine: forward, backprop, Adam, gradient checking.

Just enough machinery for the control agents: fully connected layers with
relu hidden activations and a linear, sigmoid, or softmax head, trained by
Adam on one of three losses. Gradients are verified against central finite
differences in the test suite for every head type the agents use.

Losses and their target structures:

- ``mse_on_selected_output``: targets ``(indices, values)``; only the chosen
  output of each sample contributes (Q-value regression).
- ``binary_cross_entropy``: targets ``(batch, n_out)`` in [0, 1] against a
  sigmoid head.
- ``cross_entropy``: integer class targets against a softmax head.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "sigmoid", "softmax", "linear")
_ACT_CODE = {name: i for i, name in enumerate(ACTIVATIONS)}
LOSSES = ("mse_on_selected_output", "binary_cross_entropy", "cross_entropy")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class DenseNetwork:
    """Ordered (weights, bias, activation) layers; weights are (n_in, n_out)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[str]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def validate(self) -> None:
        for i, act in enumerate(self.activations):
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
            if act in ("sigmoid", "softmax") and i != self.n_layers - 1:
                raise ValueError(f"{act} is only permitted on the final layer")
        for i in range(1, self.n_layers):
            if self.weights[i].shape[0] != self.weights[i - 1].shape[1]:
                raise ValueError(f"layer {i} input does not chain with layer {i - 1}")
        for w, b in zip(self.weights, self.biases):
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("network holds non-finite parameters")


def init_network(
    layer_sizes: list[int] | tuple[int, ...],
    activations: list[str] | tuple[str, ...],
    rng: np.random.Generator,
    weight_scale: float | None = None,
) -> DenseNetwork:
    """Glorot-uniform weights (scale sqrt(6/(fan_in+fan_out))), zero biases.

    ``weight_scale`` overrides the per-layer scale when given (0 gives an
    all-zero network, handy for fixed-point tests).
    """
    if len(layer_sizes) < 2:
        raise ValueError("need at least an input and an output size")
    if len(activations) != len(layer_sizes) - 1:
        raise ValueError(
            f"{len(layer_sizes) - 1} layers need {len(layer_sizes) - 1} activations, "
            f"got {len(activations)}"
        )
    weights, biases = [], []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        scale = weight_scale if weight_scale is not None else np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-scale, scale, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    net = DenseNetwork(weights=weights, biases=biases, activations=list(activations))
    net.validate()
    return net


def _apply_activation(z: np.ndarray, act: str) -> np.ndarray:
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if act == "softmax":
        shifted = z - z.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=-1, keepdims=True)
    return z


def _forward_cached(net: DenseNetwork, x: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    pre, post = [], [x]
    h = x
    for w, b, act in zip(net.weights, net.biases, net.activations):
        z = h @ w + b
        if not np.all(np.isfinite(z)):
            raise FloatingPointError("non-finite intermediate in forward pass")
        h = _apply_activation(z, act)
        pre.append(z)
        post.append(h)
    return pre, post


def forward(net: DenseNetwork, x: np.ndarray) -> np.ndarray:
    """Evaluate the network on one vector or a (batch, n_in) matrix."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    batch = arr[None, :] if single else arr
    if batch.shape[1] != net.weights[0].shape[0]:
        raise ValueError(
            f"input length {batch.shape[1]} does not match first layer "
            f"({net.weights[0].shape[0]})"
        )
    _, post = _forward_cached(net, batch)
    out = post[-1]
    return out[0] if single else out


def _loss_and_output_grad(
    outputs: np.ndarray, targets, loss: str, final_act: str
) -> tuple[float, np.ndarray]:
    """Loss value and gradient w.r.t. the final PRE-activation."""
    batch = outputs.shape[0]
    if loss == "mse_on_selected_output":
        if final_act != "linear":
            raise ValueError("mse_on_selected_output expects a linear head")
        idx, values = targets
        idx = np.asarray(idx, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        picked = outputs[np.arange(batch), idx]
        diff = picked - values
        loss_value = float(np.mean(diff**2))
        grad = np.zeros_like(outputs)
        grad[np.arange(batch), idx] = 2.0 * diff / batch
        return loss_value, grad
    if loss == "binary_cross_entropy":
        if final_act != "sigmoid":
            raise ValueError("binary_cross_entropy expects a sigmoid head")
        t = np.asarray(targets, dtype=np.float64)
        p = np.clip(outputs, 1e-12, 1.0 - 1e-12)
        n = p.size
        loss_value = float(-np.sum(t * np.log(p) + (1 - t) * np.log(1 - p)) / n)
        return loss_value, (outputs - t) / n
    if loss == "cross_entropy":
        if final_act != "softmax":
            raise ValueError("cross_entropy expects a softmax head")
        t = np.asarray(targets, dtype=np.int64)
        p = np.clip(outputs, 1e-12, 1.0)
        loss_value = float(-np.mean(np.log(p[np.arange(batch), t])))
        grad = outputs.copy()
        grad[np.arange(batch), t] -= 1.0
        return loss_value, grad / batch
    raise ValueError(f"unknown loss {loss!r}")


def _backward(
    net: DenseNetwork, pre: list[np.ndarray], post: list[np.ndarray], grad_z_last: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    grads_w = [np.empty(0)] * net.n_layers
    grads_b = [np.empty(0)] * net.n_layers
    grad_z = grad_z_last
    for layer in range(net.n_layers - 1, -1, -1):
        grads_w[layer] = post[layer].T @ grad_z
        grads_b[layer] = grad_z.sum(axis=0)
        if layer > 0:
            grad_h = grad_z @ net.weights[layer].T
            if net.activations[layer - 1] == "relu":
                grad_z = grad_h * (pre[layer - 1] > 0)
            else:
                grad_z = grad_h
    return grads_w, grads_b


def compute_gradients(
    net: DenseNetwork, inputs: np.ndarray, targets, loss: str
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Batch loss plus analytic parameter gradients."""
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    pre, post = _forward_cached(net, x)
    loss_value, grad_out = _loss_and_output_grad(post[-1], targets, loss, net.activations[-1])
    grads_w, grads_b = _backward(net, pre, post, grad_out)
    return loss_value, grads_w, grads_b


@dataclass
class AdamState:
    """First/second moment buffers and the shared step counter."""

    m_w: list[np.ndarray] = field(default_factory=list)
    v_w: list[np.ndarray] = field(default_factory=list)
    m_b: list[np.ndarray] = field(default_factory=list)
    v_b: list[np.ndarray] = field(default_factory=list)
    t: int = 0

    @classmethod
    def for_network(cls, net: DenseNetwork) -> "AdamState":
        return cls(
            m_w=[np.zeros_like(w) for w in net.weights],
            v_w=[np.zeros_like(w) for w in net.weights],
            m_b=[np.zeros_like(b) for b in net.biases],
            v_b=[np.zeros_like(b) for b in net.biases],
        )


def train_batch(
    net: DenseNetwork,
    inputs: np.ndarray,
    targets,
    loss: str,
    state: AdamState,
    learning_rate: float,
) -> float:
    """One Adam step on one batch; returns the pre-step loss.

    Aborts (raises, leaving parameters untouched) if any gradient is
    non-finite.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if x.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    loss_value, grads_w, grads_b = compute_gradients(net, x, targets, loss)
    for gw, gb in zip(grads_w, grads_b):
        if not (np.all(np.isfinite(gw)) and np.all(np.isfinite(gb))):
            raise FloatingPointError("non-finite gradient; step aborted")
    state.t += 1
    bc1 = 1.0 - ADAM_BETA1**state.t
    bc2 = 1.0 - ADAM_BETA2**state.t
    for layer in range(net.n_layers):
        for params, grads, m, v in (
            (net.weights, grads_w, state.m_w, state.v_w),
            (net.biases, grads_b, state.m_b, state.v_b),
        ):
            g = grads[layer]
            m[layer] = ADAM_BETA1 * m[layer] + (1 - ADAM_BETA1) * g
            v[layer] = ADAM_BETA2 * v[layer] + (1 - ADAM_BETA2) * g * g
            step = (m[layer] / bc1) / (np.sqrt(v[layer] / bc2) + ADAM_EPS)
            params[layer] -= learning_rate * step
    return loss_value


def finite_diff_check(
    net: DenseNetwork, inputs: np.ndarray, targets, loss: str, h: float = 1e-5
) -> float:
    """Max relative error between backprop and central finite differences.

    Perturbs every parameter (networks above 10^4 parameters are rejected:
    the sweep would be quadratic-cost noise, not a check).
    """
    if net.n_params > 10_000:
        raise ValueError(f"network too large for a full sweep ({net.n_params} params)")
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    _, grads_w, grads_b = compute_gradients(net, x, targets, loss)

    def loss_only() -> float:
        _, post = _forward_cached(net, x)
        value, _ = _loss_and_output_grad(post[-1], targets, loss, net.activations[-1])
        return value

    worst = 0.0
    for params, grads in ((net.weights, grads_w), (net.biases, grads_b)):
        for arr, grad in zip(params, grads):
            flat = arr.reshape(-1)
            gflat = grad.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = loss_only()
                flat[i] = orig - h
                down = loss_only()
                flat[i] = orig
                numeric = (up - down) / (2 * h)
                worst = max(worst, abs(gflat[i] - numeric) / (abs(numeric) + 1e-8))
    return worst


def save_network(net: DenseNetwork, path: str) -> None:
    """Flat little-endian layout: layer header then row-major float64 params."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", net.n_layers))
        for w, act in zip(net.weights, net.activations):
            fh.write(struct.pack("<3I", w.shape[0], w.shape[1], _ACT_CODE[act]))
        for w, b in zip(net.weights, net.biases):
            fh.write(w.astype("<f8").tobytes())
            fh.write(b.astype("<f8").tobytes())


def load_network(path: str) -> DenseNetwork:
    with open(path, "rb") as fh:
        (n_layers,) = struct.unpack("<I", fh.read(4))
        shapes, acts = [], []
        for _ in range(n_layers):
            n_in, n_out, code = struct.unpack("<3I", fh.read(12))
            shapes.append((n_in, n_out))
            acts.append(ACTIVATIONS[code])
        weights, biases = [], []
        for n_in, n_out in shapes:
            w = np.frombuffer(fh.read(n_in * n_out * 8), dtype="<f8").reshape(n_in, n_out)
            b = np.frombuffer(fh.read(n_out * 8), dtype="<f8")
            weights.append(w.copy())
            biases.append(b.copy())
    net = DenseNetwork(weights=weights, biases=biases, activations=acts)
    net.validate()
    return net
