"""Minimal dense reverse-mode autodiff used by every model component."""

from . import kernels
from .gradcheck import GradCheckResult, check_gradients, numeric_grad, relative_error
from .module import Module, Parameter, RngState
from .tensor import (
    Tensor,
    abs_,
    add,
    as_tensor,
    backward,
    broadcast_to,
    concat,
    div,
    dropout,
    exp,
    grad_enabled,
    layer_norm,
    matmul,
    mean,
    mul,
    no_grad,
    power,
    relu,
    reshape,
    sigmoid,
    softmax,
    sqrt,
    square,
    stack,
    sub,
    sum_,
    swapaxes,
    transpose,
)

__all__ = [
    "GradCheckResult",
    "Module",
    "Parameter",
    "RngState",
    "Tensor",
    "abs_",
    "add",
    "as_tensor",
    "backward",
    "broadcast_to",
    "check_gradients",
    "concat",
    "div",
    "dropout",
    "exp",
    "grad_enabled",
    "kernels",
    "layer_norm",
    "matmul",
    "mean",
    "mul",
    "no_grad",
    "numeric_grad",
    "power",
    "relative_error",
    "relu",
    "reshape",
    "sigmoid",
    "softmax",
    "sqrt",
    "square",
    "stack",
    "sub",
    "sum_",
    "swapaxes",
    "transpose",
]
