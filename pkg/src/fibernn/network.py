"""Small fully-connected classifier trained from scratch.

Plain-numpy forward pass, reverse-mode gradients, and bias-corrected ADAM.
The default configuration is a 4-6-3 network with identity ("purelin")
activations throughout, which keeps the whole map affine so it can later be
folded into a single matrix for the optical pipeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_LAYER_SIZES = (4, 6, 3)

_ACTIVATIONS: dict = {
    "purelin": (lambda z: z, lambda z: np.ones_like(z)),
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
}

LOSS_KINDS = ("nmse", "ce")


@dataclass
class DenseNetwork:
    """Weights, biases, and per-layer activation tags.

    ``weights[k]`` has shape (layer_sizes[k+1], layer_sizes[k]); biases match
    the output side. Activation tags apply at the end of each layer.
    """

    layer_sizes: tuple
    weights: list
    biases: list
    activations: tuple

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise ValueError(f"need >= 2 positive layer sizes, got {sizes}")
        object.__setattr__(self, "layer_sizes", sizes)
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError("one weight matrix and bias vector per layer pair")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[k + 1], sizes[k]) or b.shape != (sizes[k + 1],):
                raise ValueError(f"layer {k}: bad shapes {w.shape}, {b.shape}")
        for tag in self.activations:
            if tag not in _ACTIVATIONS:
                raise ValueError(f"unknown activation tag {tag!r}")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    def parameters(self) -> list:
        """Flat list [W0, b0, W1, b1, ...]; views, not copies."""
        out: list = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "DenseNetwork":
        return DenseNetwork(
            layer_sizes=self.layer_sizes,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activations=self.activations,
        )


def init_network(
    layer_sizes: Sequence[int] = DEFAULT_LAYER_SIZES,
    seed: int = 0,
    activations: Sequence[str] | str = "purelin",
) -> DenseNetwork:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2 or any(s <= 0 for s in sizes):
        raise ValueError(f"need >= 2 positive layer sizes, got {layer_sizes}")
    if isinstance(activations, str):
        activations = (activations,) * (len(sizes) - 1)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return DenseNetwork(sizes, weights, biases, tuple(activations))


def forward(net: DenseNetwork, x: np.ndarray) -> np.ndarray:
    """Evaluate the network on a single input vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.input_dim,):
        raise ValueError(f"expected input of shape ({net.input_dim},), got {x.shape}")
    return forward_batch(net, x[None, :])[0]


def forward_batch(net: DenseNetwork, x: np.ndarray) -> np.ndarray:
    """Evaluate on a (n, input_dim) batch; returns (n, output_dim)."""
    a = np.asarray(x, dtype=float)
    if a.ndim != 2 or a.shape[1] != net.input_dim:
        raise ValueError(f"expected batch of shape (n, {net.input_dim}), got {a.shape}")
    for w, b, tag in zip(net.weights, net.biases, net.activations):
        f, _ = _ACTIVATIONS[tag]
        a = f(a @ w.T + b)
    return a


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def loss(pred: np.ndarray, label: np.ndarray, kind: str = "nmse") -> float:
    """Batch loss. NMSE = sum ||p-y||^2 / sum ||y||^2; CE applies softmax
    internally and sums -y . log softmax(p) over the batch."""
    p = np.atleast_2d(np.asarray(pred, dtype=float))
    y = np.atleast_2d(np.asarray(label, dtype=float))
    if p.shape != y.shape:
        raise ValueError(f"pred/label shape mismatch: {p.shape} vs {y.shape}")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(y))):
        raise FloatingPointError("non-finite values in loss inputs")
    if kind == "nmse":
        denom = np.sum(y**2)
        if denom == 0.0:
            raise ValueError("NMSE undefined for all-zero labels")
        return float(np.sum((p - y) ** 2) / denom)
    if kind == "ce":
        logp = np.log(_softmax(p))
        return float(-np.sum(y * logp))
    raise ValueError(f"unknown loss kind {kind!r}")


def grad(
    net: DenseNetwork, batch_x: np.ndarray, batch_y: np.ndarray, kind: str = "nmse"
) -> list:
    """Reverse-mode gradients of the batch loss w.r.t. [W0, b0, W1, b1, ...]."""
    x = np.atleast_2d(np.asarray(batch_x, dtype=float))
    y = np.atleast_2d(np.asarray(batch_y, dtype=float))
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    if x.shape[1] != net.input_dim or y.shape[1] != net.output_dim:
        raise ValueError("batch dimensions do not match the network")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise FloatingPointError("non-finite values in batch")

    # Forward pass, keeping pre-activations for the backward sweep.
    acts = [x]
    pres = []
    a = x
    for w, b, tag in zip(net.weights, net.biases, net.activations):
        z = a @ w.T + b
        pres.append(z)
        a = _ACTIVATIONS[tag][0](z)
        acts.append(a)

    pred = acts[-1]
    if kind == "nmse":
        dpred = 2.0 * (pred - y) / np.sum(y**2)
    elif kind == "ce":
        dpred = _softmax(pred) - y
    else:
        raise ValueError(f"unknown loss kind {kind!r}")

    grads: list = [None] * (2 * len(net.weights))
    delta = dpred
    for k in range(len(net.weights) - 1, -1, -1):
        delta = delta * _ACTIVATIONS[net.activations[k]][1](pres[k])
        grads[2 * k] = delta.T @ acts[k]
        grads[2 * k + 1] = delta.sum(axis=0)
        if k > 0:
            delta = delta @ net.weights[k]
    return grads


@dataclass
class AdamState:
    """First/second moment accumulators and the step counter."""

    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_network(cls, net: DenseNetwork, **kwargs) -> "AdamState":
        params = net.parameters()
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            **kwargs,
        )


def adam_step(
    net: DenseNetwork, grads: list, state: AdamState, learning_rate: float
) -> None:
    """One bias-corrected ADAM update, applied to the network in place."""
    params = net.parameters()
    if len(grads) != len(params):
        raise ValueError("gradient list does not match parameter list")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g**2
        p -= learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    loss_kind: str = "nmse"
    max_epochs: int = 2000
    target_loss: float = 1e-4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}")


@dataclass
class TrainResult:
    net: DenseNetwork
    loss_history: list
    epochs_run: int

    @property
    def final_loss(self) -> float:
        return self.loss_history[-1]


def train(
    net: DenseNetwork, batch_x: np.ndarray, batch_y: np.ndarray, cfg: TrainConfig
) -> TrainResult:
    """Full-batch training until target_loss or max_epochs; returns a copy."""
    x = np.atleast_2d(np.asarray(batch_x, dtype=float))
    y = np.atleast_2d(np.asarray(batch_y, dtype=float))
    if len(x) == 0:
        raise ValueError("training set is empty")
    if x.shape[1] != net.input_dim:
        raise ValueError(
            f"input dim {x.shape[1]} does not match network input {net.input_dim}"
        )

    trained = net.copy()
    state = AdamState.for_network(trained)
    history: list = []
    epochs = 0
    for _ in range(cfg.max_epochs):
        grads = grad(trained, x, y, cfg.loss_kind)
        adam_step(trained, grads, state, cfg.learning_rate)
        epochs += 1
        current = loss(forward_batch(trained, x), y, cfg.loss_kind)
        history.append(current)
        if current <= cfg.target_loss:
            break
    return TrainResult(net=trained, loss_history=history, epochs_run=epochs)


def evaluate(net: DenseNetwork, batch_x: np.ndarray, batch_y: np.ndarray) -> tuple:
    """Argmax accuracy and confusion counts (rows true, columns predicted)."""
    x = np.atleast_2d(np.asarray(batch_x, dtype=float))
    y = np.atleast_2d(np.asarray(batch_y, dtype=float))
    if len(x) == 0:
        raise ValueError("cannot evaluate on an empty sample list")
    pred = np.argmax(forward_batch(net, x), axis=1)
    true = np.argmax(y, axis=1)
    n_classes = net.output_dim
    confusion = np.zeros((n_classes, n_classes), dtype=int)
    for t, p in zip(true, pred):
        confusion[t, p] += 1
    return float(np.mean(pred == true)), confusion


# ---------------------------------------------------------------------------
# Interchange format


def network_to_json(net: DenseNetwork, metadata: dict | None = None) -> str:
    doc = {
        "layer_sizes": list(net.layer_sizes),
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "activations": list(net.activations),
        "metadata": metadata or {},
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def network_from_json(text: str) -> DenseNetwork:
    doc = json.loads(text)
    return DenseNetwork(
        layer_sizes=tuple(doc["layer_sizes"]),
        weights=[np.array(w, dtype=float) for w in doc["weights"]],
        biases=[np.array(b, dtype=float) for b in doc["biases"]],
        activations=tuple(doc["activations"]),
    )
