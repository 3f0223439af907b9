"""Fully connected building blocks on top of the autodiff tape."""
from typing import Dict, List, Sequence

import numpy as np

from .tensor import TapeNode, dense, elu, parameter


class Dense:
    """Affine layer with Glorot-uniform weights and zero bias."""

    def __init__(self, fan_in: int, fan_out: int, rng: np.random.Generator, name: str):
        """Initialize the layer.

        Args:
            fan_in: Input width
            fan_out: Output width
            rng: Source of the initial weights
            name: Prefix for parameter names (``<name>.W`` and ``<name>.b``)
        """
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        self.weight = parameter(rng.uniform(-limit, limit, size=(fan_in, fan_out)), name=f"{name}.W")
        self.bias = parameter(np.zeros(fan_out), name=f"{name}.b")

    def __call__(self, x) -> TapeNode:
        return dense(x, self.weight, self.bias)

    def parameters(self) -> Dict[str, TapeNode]:
        return {self.weight.name: self.weight, self.bias.name: self.bias}


class MLP:
    """Stack of Dense layers with ELU between them and a linear output."""

    def __init__(self, in_features: int, hidden_neurons: int, hidden_layers: int,
                 out_features: int, rng: np.random.Generator, name: str):
        sizes = [in_features] + [hidden_neurons] * hidden_layers + [out_features]
        self.name = name
        self.layers: List[Dense] = [
            Dense(fan_in, fan_out, rng, f"{name}.{i}")
            for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:]))
        ]

    @property
    def out_features(self) -> int:
        return self.layers[-1].bias.shape[0]

    def __call__(self, x) -> TapeNode:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = elu(x)
        return x

    def parameters(self) -> Dict[str, TapeNode]:
        params: Dict[str, TapeNode] = {}
        for layer in self.layers:
            params.update(layer.parameters())
        return params


def zero_grad(params: Dict[str, TapeNode]):
    for node in params.values():
        node.zero_grad()


def decay_mask(params: Sequence[str]) -> List[str]:
    """Names of the parameters subject to weight decay (dense weights only)."""
    return [name for name in params if name.endswith(".W")]
