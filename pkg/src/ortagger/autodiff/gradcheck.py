"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import NumericError, Tensor, backward

DEFAULT_EPSILON = 1e-5


def numeric_grad(fn: Callable[[], Tensor], x: Tensor, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Central differences of the scalar ``fn()`` w.r.t. every entry of ``x``."""
    grad = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + epsilon
        plus = fn().item()
        flat[i] = orig - epsilon
        minus = fn().item()
        flat[i] = orig
        if not (np.isfinite(plus) and np.isfinite(minus)):
            raise NumericError("grad_check", f"entry {i}")
        grad.reshape(-1)[i] = (plus - minus) / (2.0 * epsilon)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float((np.abs(analytic - numeric) / denom).max(initial=0.0))


def grad_check(fn: Callable[[], Tensor], inputs: Sequence[Tensor],
               epsilon: float = DEFAULT_EPSILON) -> float:
    """Max symmetric relative error between backprop and central differences.

    ``fn`` must rebuild the graph from ``inputs`` on each call and return a
    scalar; ``inputs`` are perturbed in place and restored.
    """
    if not 0 < epsilon <= 1e-3:
        raise ValueError(f"epsilon must lie in (0, 1e-3], got {epsilon}")
    for x in inputs:
        x.grad = None
    out = fn()
    backward(out)
    analytic = [np.zeros_like(x.data) if x.grad is None else x.grad.copy() for x in inputs]
    worst = 0.0
    for x, a in zip(inputs, analytic):
        worst = max(worst, relative_error(a, numeric_grad(fn, x, epsilon)))
    return worst
