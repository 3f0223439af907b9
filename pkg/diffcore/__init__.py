"""Dense-tensor autodiff substrate: tape, ops, layers and Adam."""
from .nn import MLP, Dense, decay_mask, zero_grad
from .optim import Adam, AdamState, adam_step
from .tensor import (
    OP_KINDS,
    TapeNode,
    Tensor,
    add,
    as_tensor,
    backward,
    clip,
    concat,
    constant,
    dense,
    elementwise,
    elu,
    exp,
    log,
    log_sigmoid,
    logit,
    matmul,
    mul,
    neg,
    parameter,
    reduce,
    reduce_mean,
    reduce_sum,
    reshape,
    sigmoid,
    sigmoid_cross_entropy,
    softplus,
    square,
    stop_gradient,
    straight_through_bernoulli,
    sub,
)
