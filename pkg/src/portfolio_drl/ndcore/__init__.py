"""Minimal float64 tensor library with reverse-mode autodiff and two optimizers."""
from .checkpoint import check_compatible, load_params, save_params
from .graph import Graph, backward, forward, param_count
from .optim import SGD, Adam, make_optimizer, opt_step
from .tensor import (
    ShapeError,
    Tensor,
    abs_,
    add,
    as_tensor,
    clip,
    concat,
    conv1d,
    dense,
    div,
    exp,
    getitem,
    grad,
    log,
    matmul,
    minimum,
    mul,
    power,
    reduce_mean,
    reduce_sum,
    relu,
    reshape,
    softmax,
    softplus,
    sub,
    tanh,
)

__all__ = [
    "Adam", "Graph", "SGD", "ShapeError", "Tensor", "abs_", "add", "as_tensor", "backward",
    "check_compatible", "clip", "concat", "conv1d", "dense", "div", "exp", "forward", "getitem",
    "grad", "load_params", "log", "make_optimizer", "matmul", "minimum", "mul", "opt_step",
    "param_count", "power", "reduce_mean", "reduce_sum", "relu", "reshape", "save_params",
    "softmax", "softplus", "sub", "tanh",
]
