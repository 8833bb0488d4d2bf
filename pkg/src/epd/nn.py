"""Minimal dense-network engine on numpy.

Feedforward stacks of fully connected layers with relu hidden units and a
softmax head, enough to put the learning-rate controllers on top of real
gradient descent at desk scale.

Two loss notions coexist on purpose:

* ``cross_entropy`` is the reported signal fed to controllers and logs:
  the class-wise binary cross-entropy summed over classes and averaged
  over samples, computed from the clipped output probabilities.
* ``training_objective`` is the categorical cross-entropy that the
  gradient actually descends (softmax + CE has the stable, exact
  backward pass ``(p - y) / n``).

``backward_and_update`` applies one optimizer step in place and returns
the reported loss of the mini-batch before the update.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PROB_EPS = 1e-12  # probability clip before any log


class ShapeMismatch(ValueError):
    """Input or layer dimensions do not chain."""


class NonFiniteGradient(FloatingPointError):
    """A gradient component came out NaN or infinite; the run must abort."""


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class DenseLayer:
    weights: np.ndarray  # (n_in, n_out)
    bias: np.ndarray     # (n_out,)
    activation: str      # "relu" or "softmax"


class Network:
    """Ordered dense layers; the last layer must be softmax."""

    def __init__(self, layers: list[DenseLayer]):
        if not layers:
            raise ValueError("network needs at least one layer")
        for i, layer in enumerate(layers):
            if layer.activation not in ("relu", "softmax"):
                raise ValueError(f"unknown activation {layer.activation!r}")
            if layer.weights.shape[1] != layer.bias.shape[0]:
                raise ShapeMismatch(
                    f"layer {i}: weights {layer.weights.shape} vs bias {layer.bias.shape}"
                )
            if i > 0 and layers[i - 1].weights.shape[1] != layer.weights.shape[0]:
                raise ShapeMismatch(
                    f"layer {i - 1} output dim {layers[i - 1].weights.shape[1]} "
                    f"!= layer {i} input dim {layer.weights.shape[0]}"
                )
        if layers[-1].activation != "softmax":
            raise ValueError("final layer activation must be softmax")
        self.layers = layers

    @classmethod
    def create(
        cls,
        n_inputs: int,
        hidden: tuple[int, ...],
        n_classes: int,
        rng: np.random.Generator,
    ) -> "Network":
        """Fan-in scaled uniform init: W ~ U(-a, a) with a = 1/sqrt(n_in), b = 0."""
        sizes = [n_inputs, *hidden, n_classes]
        layers = []
        for i in range(len(sizes) - 1):
            n_in, n_out = sizes[i], sizes[i + 1]
            a = 1.0 / np.sqrt(n_in)
            layers.append(
                DenseLayer(
                    weights=rng.uniform(-a, a, size=(n_in, n_out)),
                    bias=np.zeros(n_out),
                    activation="softmax" if i == len(sizes) - 2 else "relu",
                )
            )
        return cls(layers)

    @property
    def n_inputs(self) -> int:
        return self.layers[0].weights.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.layers[-1].weights.shape[1]

    def num_params(self) -> int:
        return sum(l.weights.size + l.bias.size for l in self.layers)

    def get_theta(self) -> np.ndarray:
        """Flat copy of all parameters, layer by layer, weights then bias."""
        return np.concatenate(
            [np.concatenate([l.weights.ravel(), l.bias]) for l in self.layers]
        )

    def set_theta(self, theta: np.ndarray) -> None:
        if theta.shape != (self.num_params(),):
            raise ShapeMismatch(
                f"theta has shape {theta.shape}, expected ({self.num_params()},)"
            )
        offset = 0
        for layer in self.layers:
            w_size = layer.weights.size
            layer.weights = theta[offset:offset + w_size].reshape(layer.weights.shape).copy()
            offset += w_size
            b_size = layer.bias.size
            layer.bias = theta[offset:offset + b_size].copy()
            offset += b_size


@dataclass
class PredictionBatch:
    """Model probabilities against one-hot ground truth, row per sample."""

    y_hat: np.ndarray  # (V, C) rows sum to 1
    y: np.ndarray      # (V, C) one-hot


def forward(net: Network, inputs: np.ndarray) -> np.ndarray:
    """Row-stochastic (V, C) probability matrix."""
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    if x.shape[1] != net.n_inputs:
        raise ShapeMismatch(f"input dim {x.shape[1]} != network input {net.n_inputs}")
    for layer in net.layers:
        z = x @ layer.weights + layer.bias
        x = relu(z) if layer.activation == "relu" else softmax(z)
    return x


def _forward_trace(net: Network, x: np.ndarray):
    """Forward pass keeping (input activation, pre-activation) per layer."""
    trace = []
    a = x
    for layer in net.layers:
        z = a @ layer.weights + layer.bias
        trace.append((a, z))
        a = relu(z) if layer.activation == "relu" else softmax(z)
    return a, trace


def cross_entropy(pred: PredictionBatch) -> float:
    """Reported loss: binary cross-entropy summed over classes, mean over rows."""
    p = np.clip(pred.y_hat, PROB_EPS, 1.0 - PROB_EPS)
    y = pred.y
    per_row = (y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).sum(axis=1)
    return float(-per_row.mean())


def accuracy(pred: PredictionBatch) -> float:
    """Fraction of rows whose argmax matches; ties go to the lowest class index."""
    return float((pred.y_hat.argmax(axis=1) == pred.y.argmax(axis=1)).mean())


def training_objective(net: Network, x: np.ndarray, y_onehot: np.ndarray) -> float:
    """Categorical cross-entropy actually descended by ``gradient``."""
    p = np.clip(forward(net, x), PROB_EPS, None)
    return float(-(y_onehot * np.log(p)).sum(axis=1).mean())


def _backprop(net: Network, x: np.ndarray, y_onehot: np.ndarray):
    """Backprop of ``training_objective``; returns (probs, flat gradient)."""
    probs, trace = _forward_trace(net, x)
    delta = (probs - y_onehot) / x.shape[0]
    grads: list[np.ndarray] = []
    for i in range(len(net.layers) - 1, -1, -1):
        a_in, _ = trace[i]
        dw = a_in.T @ delta
        db = delta.sum(axis=0)
        grads.append(np.concatenate([dw.ravel(), db]))
        if i > 0:
            _, z_prev = trace[i - 1]
            delta = (delta @ net.layers[i].weights.T) * (z_prev > 0)
    return probs, np.concatenate(grads[::-1])


def gradient(net: Network, x: np.ndarray, y_onehot: np.ndarray) -> np.ndarray:
    """Flat analytic gradient of ``training_objective`` via backprop."""
    return _backprop(net, np.atleast_2d(np.asarray(x, dtype=float)), y_onehot)[1]


class SgdExternalLr:
    """Plain SGD; the step size comes from outside on every call."""

    def apply(self, theta: np.ndarray, grad: np.ndarray, lam: float) -> np.ndarray:
        return theta - lam * grad


class Adam:
    """Adam with bias-corrected moments; ``lam`` is the step size."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m: np.ndarray | None = None
        self.v: np.ndarray | None = None

    def apply(self, theta: np.ndarray, grad: np.ndarray, lam: float) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad**2
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return theta - lam * m_hat / (np.sqrt(v_hat) + self.epsilon)


class AmsGrad:
    """Adam variant keeping the elementwise max of the corrected second moment.

    The max buffer is monotonically nondecreasing; when it never exceeds the
    current corrected moment the trajectory coincides with Adam's.
    """

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m: np.ndarray | None = None
        self.v: np.ndarray | None = None
        self.v_hat_max: np.ndarray | None = None

    def apply(self, theta: np.ndarray, grad: np.ndarray, lam: float) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
            self.v_hat_max = np.zeros_like(theta)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad**2
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        self.v_hat_max = np.maximum(self.v_hat_max, v_hat)
        return theta - lam * m_hat / (np.sqrt(self.v_hat_max) + self.epsilon)


def backward_and_update(
    net: Network,
    x: np.ndarray,
    y_onehot: np.ndarray,
    lam: float,
    opt,
) -> float:
    """One optimizer step on a mini-batch, in place.

    Returns the reported (``cross_entropy``) loss of the batch measured
    before the update. Raises ``NonFiniteGradient`` if any gradient
    component is NaN or infinite.
    """
    if x.shape[0] == 0:
        raise ValueError("mini-batch is empty")
    if not lam > 0:
        raise ValueError(f"learning rate must be positive, got {lam}")
    probs, flat = _backprop(net, np.atleast_2d(np.asarray(x, dtype=float)), y_onehot)
    reported = cross_entropy(PredictionBatch(y_hat=probs, y=y_onehot))
    if not np.isfinite(flat).all():
        bad = int(np.flatnonzero(~np.isfinite(flat))[0])
        raise NonFiniteGradient(
            f"gradient has non-finite component at flat index {bad} "
            f"(loss={reported!r}, |theta|max={np.abs(net.get_theta()).max()!r})"
        )
    net.set_theta(opt.apply(net.get_theta(), flat, lam))
    return reported


def save_network(net: Network, path: str | Path) -> None:
    """Checkpoint as JSON: ``{"layers": [{"weights", "bias", "activation"}]}``.

    Floats survive the round trip exactly (shortest-repr encoding).
    """
    payload = {
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation,
            }
            for layer in net.layers
        ]
    }
    Path(path).write_text(json.dumps(payload))


def load_network(path: str | Path) -> Network:
    payload = json.loads(Path(path).read_text())
    layers = [
        DenseLayer(
            weights=np.asarray(spec["weights"], dtype=float),
            bias=np.asarray(spec["bias"], dtype=float),
            activation=spec["activation"],
        )
        for spec in payload["layers"]
    ]
    return Network(layers)
