"""Minimal float64 tensor library with reverse-mode autodiff."""

from . import ops
from .gradcheck import grad_check, numeric_grad, relative_error
from .optim import Adam, AdamState, adam_step, clip_grad_norm, glorot_uniform, scaled_uniform
from .tensor import (
    DTYPE,
    NumericError,
    Parameter,
    ShapeError,
    Tensor,
    backward,
    ensure_tensor,
    forward_eval,
    no_grad,
)

__all__ = [
    "Adam", "AdamState", "DTYPE", "NumericError", "Parameter", "ShapeError", "Tensor",
    "adam_step", "backward", "clip_grad_norm", "ensure_tensor", "forward_eval",
    "glorot_uniform", "grad_check", "no_grad", "numeric_grad", "ops",
    "relative_error", "scaled_uniform",
]
