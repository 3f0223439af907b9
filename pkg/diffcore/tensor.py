"""Dense float64 tensors with a reverse-mode automatic differentiation tape.

Values are plain ``numpy`` arrays (``float64``, row-major). A :class:`TapeNode` wraps a
value together with the record of the operation that produced it. Calling
:func:`backward` on a scalar node walks the recorded graph once in reverse topological
order and accumulates total derivatives into every node that requires a gradient.

The graph is rebuilt on every forward pass, so models are free to sample fresh latents
per batch.
"""
import logging
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special

from utils.constants import PROB_CLAMP
from utils.errors import ContractError, DimensionError, DomainError

logger = logging.getLogger(__name__)

Tensor = np.ndarray
ArrayLike = Union["TapeNode", np.ndarray, float, int, Sequence[float]]
VJP = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


def as_tensor(data) -> Tensor:
    """Convert array-like data into a float64 tensor (always a fresh copy)."""
    return np.array(data, dtype=np.float64)


class TapeNode:
    """A tensor value plus the autodiff record that produced it."""

    __slots__ = ("value", "grad", "requires_grad", "op", "parents", "_vjp", "name")

    def __init__(self, value, requires_grad: bool = False, name: Optional[str] = None,
                 op: str = "leaf", parents: Tuple["TapeNode", ...] = (), vjp: Optional[VJP] = None):
        """Create a node.

        Args:
            value: Array-like value
            requires_grad: Whether gradients should flow into this node
            name: Optional label (parameters carry their registry name here)
            op: Name of the producing operation
            parents: Input nodes of the producing operation
            vjp: Vector-Jacobian product mapping the output gradient to parent gradients
        """
        self.value = value if isinstance(value, np.ndarray) and value.dtype == np.float64 else as_tensor(value)
        self.grad: Optional[Tensor] = None
        self.requires_grad = requires_grad
        self.op = op
        self.parents = parents
        self._vjp = vjp
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    def zero_grad(self):
        """Drop any accumulated gradient."""
        self.grad = None

    def item(self) -> float:
        return float(self.value.reshape(-1)[0])

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"TapeNode(op={self.op!r}{label}, shape={self.shape}, requires_grad={self.requires_grad})"


def constant(data) -> TapeNode:
    """Wrap data as a node that never receives gradients."""
    return data if isinstance(data, TapeNode) else TapeNode(data)


def parameter(data, name: str) -> TapeNode:
    """Create a trainable leaf node."""
    return TapeNode(as_tensor(data), requires_grad=True, name=name)


def _record(value: Tensor, parents: Tuple[TapeNode, ...], vjp: VJP, op: str) -> TapeNode:
    if any(p.requires_grad for p in parents):
        return TapeNode(value, requires_grad=True, op=op, parents=parents, vjp=vjp)
    return TapeNode(value, op=op)


def _is_scalar(node: TapeNode) -> bool:
    return node.value.size == 1


def _check_broadcast(op_kind: str, a: TapeNode, b: TapeNode):
    if a.shape == b.shape or _is_scalar(a) or _is_scalar(b):
        return
    raise DimensionError(f"{op_kind}: incompatible shapes {a.shape} and {b.shape}")


def _unbroadcast(grad: Tensor, shape: Tuple[int, ...]) -> Tensor:
    if grad.shape == shape:
        return grad
    return np.full(shape, grad.sum())


# Elementwise kernels: forward(x) and backward(x, y, g) for unary kinds.
def _log_forward(x: Tensor) -> Tensor:
    if np.any(~(x > 0)):
        raise DomainError("log: input must be strictly positive")
    return np.log(x)


def _logit_forward(x: Tensor) -> Tensor:
    if np.any(~((x >= 0) & (x <= 1))):
        raise DomainError("logit: input must lie in [0, 1]")
    return special.logit(np.clip(x, PROB_CLAMP, 1.0 - PROB_CLAMP))


def _logit_backward(x: Tensor, y: Tensor, g: Tensor) -> Tensor:
    inside = (x >= PROB_CLAMP) & (x <= 1.0 - PROB_CLAMP)
    p = np.clip(x, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return np.where(inside, g / (p * (1.0 - p)), 0.0)


_UNARY: Dict[str, Tuple[Callable[[Tensor], Tensor], Callable[[Tensor, Tensor, Tensor], Tensor]]] = {
    "neg": (np.negative, lambda x, y, g: -g),
    "exp": (np.exp, lambda x, y, g: g * y),
    "log": (_log_forward, lambda x, y, g: g / x),
    "sigmoid": (special.expit, lambda x, y, g: g * y * (1.0 - y)),
    "softplus": (lambda x: np.logaddexp(0.0, x), lambda x, y, g: g * special.expit(x)),
    "square": (np.square, lambda x, y, g: 2.0 * x * g),
    "elu": (lambda x: np.where(x > 0, x, np.expm1(np.minimum(x, 0.0))),
            lambda x, y, g: g * np.where(x > 0, 1.0, y + 1.0)),
    "logit": (_logit_forward, _logit_backward),
}

_BINARY = ("add", "sub", "mul")

OP_KINDS = tuple(_UNARY) + _BINARY


def elementwise(op_kind: str, *args: ArrayLike) -> TapeNode:
    """Apply an entrywise operation.

    Args:
        op_kind: One of ``add, sub, mul`` (two arguments) or ``neg, exp, log, sigmoid,
            softplus, square, elu, logit`` (one argument)
        *args: Operand nodes or array-likes (lifted to constants)

    Returns:
        Result node with a chain-rule backward for the chosen kind

    Raises:
        DimensionError: Operands neither share a shape nor include a scalar
        DomainError: ``log`` of a non-positive value, ``logit`` outside [0, 1]
    """
    nodes = tuple(constant(a) for a in args)
    if op_kind in _UNARY:
        if len(nodes) != 1:
            raise ContractError(f"{op_kind} takes one operand, got {len(nodes)}")
        (x,) = nodes
        forward, backward_fn = _UNARY[op_kind]
        y = forward(x.value)
        xv = x.value
        return _record(y, nodes, lambda g: (backward_fn(xv, y, g),), op_kind)

    if op_kind not in _BINARY:
        raise ContractError(f"unknown elementwise op '{op_kind}'")
    if len(nodes) != 2:
        raise ContractError(f"{op_kind} takes two operands, got {len(nodes)}")
    a, b = nodes
    _check_broadcast(op_kind, a, b)
    av, bv = a.value, b.value
    if op_kind == "add":
        value = av + bv

        def vjp(g):
            return _unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)
    elif op_kind == "sub":
        value = av - bv

        def vjp(g):
            return _unbroadcast(g, av.shape), _unbroadcast(-g, bv.shape)
    else:
        value = av * bv

        def vjp(g):
            return _unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)
    return _record(value, nodes, vjp, op_kind)


def add(a: ArrayLike, b: ArrayLike) -> TapeNode:
    return elementwise("add", a, b)


def sub(a: ArrayLike, b: ArrayLike) -> TapeNode:
    return elementwise("sub", a, b)


def mul(a: ArrayLike, b: ArrayLike) -> TapeNode:
    return elementwise("mul", a, b)


def neg(x: ArrayLike) -> TapeNode:
    return elementwise("neg", x)


def exp(x: ArrayLike) -> TapeNode:
    return elementwise("exp", x)


def log(x: ArrayLike) -> TapeNode:
    return elementwise("log", x)


def sigmoid(x: ArrayLike) -> TapeNode:
    return elementwise("sigmoid", x)


def softplus(x: ArrayLike) -> TapeNode:
    return elementwise("softplus", x)


def square(x: ArrayLike) -> TapeNode:
    return elementwise("square", x)


def elu(x: ArrayLike) -> TapeNode:
    return elementwise("elu", x)


def logit(x: ArrayLike) -> TapeNode:
    """Inverse sigmoid; inputs in [0, 1] are clamped to [PROB_CLAMP, 1 - PROB_CLAMP]."""
    return elementwise("logit", x)


def clip(x: ArrayLike, low: float, high: float) -> TapeNode:
    """Clamp entries to [low, high]; the gradient is zero where clamping was active."""
    x = constant(x)
    xv = x.value
    value = np.clip(xv, low, high)
    return _record(value, (x,), lambda g: (np.where((xv >= low) & (xv <= high), g, 0.0),), "clip")


def matmul(a: ArrayLike, b: ArrayLike) -> TapeNode:
    """Matrix product of an [n x k] and a [k x m] node."""
    a, b = constant(a), constant(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    av, bv = a.value, b.value
    return _record(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g), "matmul")


def dense(x: ArrayLike, weight: ArrayLike, bias: ArrayLike) -> TapeNode:
    """Affine map ``x @ weight + bias`` with the bias broadcast over rows."""
    x, weight, bias = constant(x), constant(weight), constant(bias)
    if x.value.ndim != 2 or weight.value.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise DimensionError(f"dense: input {x.shape} does not match weight {weight.shape}")
    if bias.shape != (weight.shape[1],):
        raise DimensionError(f"dense: bias {bias.shape} does not match weight {weight.shape}")
    xv, wv = x.value, weight.value

    def vjp(g):
        return g @ wv.T, xv.T @ g, g.sum(axis=0)

    return _record(xv @ wv + bias.value, (x, weight, bias), vjp, "dense")


def concat(nodes: Sequence[ArrayLike], axis: int = 1) -> TapeNode:
    """Concatenate nodes along an axis."""
    nodes = tuple(constant(n) for n in nodes)
    if not nodes:
        raise ContractError("concat: need at least one operand")
    if len(nodes) == 1:
        return nodes[0]
    try:
        value = np.concatenate([n.value for n in nodes], axis=axis)
    except ValueError as e:
        raise DimensionError(f"concat: {e}") from e
    bounds = np.cumsum([n.shape[axis] for n in nodes])[:-1]

    def vjp(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _record(value, nodes, vjp, "concat")


def reshape(x: ArrayLike, shape: Tuple[int, ...]) -> TapeNode:
    x = constant(x)
    original = x.shape
    try:
        value = x.value.reshape(shape)
    except ValueError as e:
        raise DimensionError(f"reshape: {e}") from e
    return _record(value, (x,), lambda g: (g.reshape(original),), "reshape")


def reduce(op_kind: str, x: ArrayLike, axis: Optional[int] = None) -> TapeNode:
    """Sum or mean over one axis, or over everything when ``axis`` is None.

    Raises:
        DimensionError: Axis out of range
        ContractError: Unknown reduction kind
    """
    if op_kind not in ("sum", "mean"):
        raise ContractError(f"unknown reduction '{op_kind}'")
    x = constant(x)
    xv = x.value
    if axis is not None and not -xv.ndim <= axis < xv.ndim:
        raise DimensionError(f"{op_kind}: axis {axis} invalid for shape {xv.shape}")
    count = xv.size if axis is None else xv.shape[axis]
    value = xv.sum(axis=axis)
    if op_kind == "mean":
        value = value / count
    scale = 1.0 / count if op_kind == "mean" else 1.0

    def vjp(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g * scale, xv.shape).copy(),)

    return _record(np.asarray(value, dtype=np.float64), (x,), vjp, op_kind)


def reduce_sum(x: ArrayLike, axis: Optional[int] = None) -> TapeNode:
    return reduce("sum", x, axis)


def reduce_mean(x: ArrayLike, axis: Optional[int] = None) -> TapeNode:
    return reduce("mean", x, axis)


def stop_gradient(x: ArrayLike) -> TapeNode:
    """Identity on values; nothing flows back through this edge."""
    x = constant(x)
    return TapeNode(x.value.copy(), op="stop_gradient")


def sigmoid_cross_entropy(logits: ArrayLike, targets: ArrayLike) -> TapeNode:
    """Entrywise ``-[t log σ(l) + (1 - t) log(1 - σ(l))]`` without forming σ(l).

    Targets may be fractional (bounded outcomes in [0, 1]).
    """
    logits, targets = constant(logits), constant(targets)
    _check_broadcast("sigmoid_cross_entropy", logits, targets)
    lv, tv = logits.value, targets.value
    value = np.logaddexp(0.0, lv) - lv * tv

    def vjp(g):
        return (_unbroadcast(g * (special.expit(lv) - tv), lv.shape),
                _unbroadcast(-g * lv, tv.shape))

    return _record(value, (logits, targets), vjp, "sigmoid_cross_entropy")


def log_sigmoid(x: ArrayLike) -> TapeNode:
    """Entrywise ``log σ(x)`` computed stably."""
    x = constant(x)
    xv = x.value
    return _record(special.log_expit(xv), (x,), lambda g: (g * special.expit(-xv),), "log_sigmoid")


def straight_through_bernoulli(probs: TapeNode, rng: np.random.Generator) -> TapeNode:
    """Draw hard {0, 1} samples whose backward pass is the identity onto ``probs``."""
    draws = (rng.random(probs.shape) < probs.value).astype(np.float64)
    return add(draws, sub(probs, stop_gradient(probs)))


def _topological_order(root: TapeNode):
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: TapeNode) -> Dict[TapeNode, Tensor]:
    """Accumulate d(loss)/d(node) into ``.grad`` of every node that requires it.

    Args:
        loss: Scalar node

    Returns:
        Map from each reached leaf parameter to its (accumulated) gradient

    Raises:
        ContractError: ``loss`` is not a scalar
    """
    if loss.value.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return {}

    pending: Dict[int, Tensor] = {id(loss): np.ones_like(loss.value)}
    leaves: Dict[TapeNode, Tensor] = {}
    for node in reversed(_topological_order(loss)):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        if node.grad is None:
            node.grad = np.zeros_like(node.value)
        node.grad += g
        if node.is_leaf:
            leaves[node] = node.grad
            continue
        for parent, parent_grad in zip(node.parents, node._vjp(g)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            pending[key] = pending[key] + parent_grad if key in pending else parent_grad
    return leaves
