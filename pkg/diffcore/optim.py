"""Adam with decoupled weight decay and inverse-time learning-rate decay."""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional

import numpy as np

from utils.errors import ContractError, DimensionError, OptimizerError
from .tensor import TapeNode

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """Moments, step counter and hyperparameters of one Adam run."""
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    lr_decay: float = 0.0
    step: int = 0
    epoch: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def current_lr(self) -> float:
        """Learning rate for the current epoch: lr / (1 + lr_decay * epoch)."""
        return self.lr / (1.0 + self.lr_decay * self.epoch)


def adam_step(params: Mapping[str, TapeNode], grads: Mapping[str, Optional[np.ndarray]],
              state: AdamState, decay: Optional[Iterable[str]] = None) -> Mapping[str, TapeNode]:
    """Apply one Adam update in place.

    Args:
        params: Parameter nodes by name
        grads: Gradients by name; a missing or None entry counts as zero
        state: Optimizer state, advanced by one step
        decay: Names subject to decoupled weight decay (all parameters when None)

    Returns:
        The updated parameter map

    Raises:
        OptimizerError: A gradient contains NaN or infinity
        DimensionError: A gradient shape disagrees with its parameter
    """
    for name, node in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != node.shape:
            raise DimensionError(f"gradient for '{name}' has shape {g.shape}, parameter has {node.shape}")
        if not np.all(np.isfinite(g)):
            raise OptimizerError(name)

    decay_names = set(params) if decay is None else set(decay)
    state.step += 1
    lr = state.current_lr
    bias1 = 1.0 - state.beta1 ** state.step
    bias2 = 1.0 - state.beta2 ** state.step

    for name, node in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(node.value)
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(node.value)
            v = np.zeros_like(node.value)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[name], state.v[name] = m, v

        value = node.value
        if state.weight_decay and name in decay_names:
            value = value - lr * state.weight_decay * value
        node.value = value - lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)
    return params


class Adam:
    """Optimizer bound to a parameter registry, reading gradients off the nodes."""

    def __init__(self, params: Mapping[str, TapeNode], lr: float = 1e-3, weight_decay: float = 0.0,
                 lr_decay: float = 0.0, betas=(0.9, 0.999), eps: float = 1e-8,
                 decay: Optional[Iterable[str]] = None):
        if lr <= 0:
            raise ContractError(f"learning rate must be positive, got {lr}")
        self.params = dict(params)
        self.decay = list(decay) if decay is not None else None
        self.state = AdamState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps,
                               weight_decay=weight_decay, lr_decay=lr_decay)

    def zero_grad(self):
        for node in self.params.values():
            node.zero_grad()

    def set_epoch(self, epoch: int):
        self.state.epoch = epoch

    def step(self):
        grads = {name: node.grad for name, node in self.params.items()}
        adam_step(self.params, grads, self.state, self.decay)
