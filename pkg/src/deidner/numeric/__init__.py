from .gradcheck import finite_difference_check
from .rng import SeededRng
from .tensor import (
    Parameter,
    ShapeError,
    Tape,
    Tensor,
    add,
    as_tensor,
    backward,
    concat,
    custom,
    div,
    dropout,
    exp,
    gather,
    index,
    layer_norm,
    log,
    log_softmax,
    logsumexp,
    masked_fill,
    matmul,
    mul,
    neg,
    no_grad,
    reduce_mean,
    reduce_sum,
    relu,
    reshape,
    sigmoid,
    softmax,
    sqrt,
    stack,
    sub,
    tanh,
    transpose,
)

__all__ = [name for name in dir() if not name.startswith("_")]
