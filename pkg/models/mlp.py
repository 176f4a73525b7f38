"""
Dense layers with hand-written backpropagation.

Inputs are row batches of shape (N, in). Weights are stored (in, out) so a
layer computes `x @ W + b`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from core.errors import PipelineError
from services.checkpoint_store import ACTIVATION_CODES, LayerPayload

LayerGrad = Tuple[np.ndarray, np.ndarray]
LayerCache = Tuple[np.ndarray, np.ndarray]


class DimensionMismatchError(PipelineError):
    """Raised when an input or a layer does not fit the shape a branch expects."""

    def __init__(self, branch: str, message: str):
        self.branch = branch
        super().__init__(f"{branch}: {message}")


@dataclass
class DenseLayer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "linear"

    @property
    def fan_in(self) -> int:
        return int(self.weight.shape[0])

    @property
    def fan_out(self) -> int:
        return int(self.weight.shape[1])


class MlpParams:
    """A chain of dense layers; hidden layers use ReLU, the last one is linear."""

    def __init__(self, layers: Sequence[DenseLayer], name: str = "mlp"):
        if not layers:
            raise DimensionMismatchError(name, "needs at least one layer")
        for position, layer in enumerate(layers):
            if layer.weight.ndim != 2 or layer.bias.shape != (layer.weight.shape[1],):
                raise DimensionMismatchError(
                    name, f"layer {position} has weight {layer.weight.shape} and bias {layer.bias.shape}"
                )
            if layer.activation not in ACTIVATION_CODES:
                raise DimensionMismatchError(name, f"layer {position} has unknown activation {layer.activation!r}")
            if not (np.all(np.isfinite(layer.weight)) and np.all(np.isfinite(layer.bias))):
                raise DimensionMismatchError(name, f"layer {position} has non-finite parameters")
            if position and layers[position - 1].fan_out != layer.fan_in:
                raise DimensionMismatchError(
                    name, f"layer {position} expects {layer.fan_in} inputs, previous layer gives {layers[position - 1].fan_out}"
                )
        self.name = name
        self.layers: List[DenseLayer] = list(layers)

    @classmethod
    def init(cls, sizes: Sequence[int], rng: np.random.Generator, name: str = "mlp") -> "MlpParams":
        """He-uniform weights, limit sqrt(6 / fan_in); zero biases."""
        if len(sizes) < 2 or any(size < 1 for size in sizes):
            raise DimensionMismatchError(name, f"invalid layer sizes {tuple(sizes)}")
        layers = []
        for position, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            limit = np.sqrt(6.0 / fan_in)
            layers.append(
                DenseLayer(
                    weight=rng.uniform(-limit, limit, size=(fan_in, fan_out)),
                    bias=np.zeros(fan_out),
                    activation="relu" if position < len(sizes) - 2 else "linear",
                )
            )
        return cls(layers, name)

    @property
    def input_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].fan_out

    @property
    def sizes(self) -> Tuple[int, ...]:
        return (self.input_dim,) + tuple(layer.fan_out for layer in self.layers)

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, List[LayerCache]]:
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise DimensionMismatchError(self.name, f"expected input (N, {self.input_dim}), got {x.shape}")
        cache: List[LayerCache] = []
        h = x
        for layer in self.layers:
            z = h @ layer.weight + layer.bias
            cache.append((h, z))
            h = np.maximum(z, 0.0) if layer.activation == "relu" else z
        return h, cache

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: List[LayerCache], grad_out: np.ndarray) -> Tuple[List[LayerGrad], np.ndarray]:
        """Parameter gradients per layer plus the gradient w.r.t. the input."""
        grads: List[LayerGrad] = [(np.empty(0), np.empty(0))] * len(self.layers)
        g = grad_out
        for position in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[position]
            h_in, z = cache[position]
            if layer.activation == "relu":
                g = g * (z > 0)
            grads[position] = (h_in.T @ g, g.sum(axis=0))
            g = g @ layer.weight.T
        return grads, g

    def copy(self) -> "MlpParams":
        return MlpParams(
            [DenseLayer(layer.weight.copy(), layer.bias.copy(), layer.activation) for layer in self.layers],
            self.name,
        )

    def to_payload(self) -> List[LayerPayload]:
        return [LayerPayload(layer.weight, layer.bias, layer.activation) for layer in self.layers]

    @classmethod
    def from_payload(cls, layers: Sequence[LayerPayload], name: str) -> "MlpParams":
        return cls([DenseLayer(layer.weight.copy(), layer.bias.copy(), layer.activation) for layer in layers], name)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy over rows and its gradient w.r.t. the logits."""
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    rows = np.arange(n)
    loss = float(-log_probs[rows, targets].mean())
    grad = np.exp(log_probs)
    grad[rows, targets] -= 1.0
    return loss, grad / n
