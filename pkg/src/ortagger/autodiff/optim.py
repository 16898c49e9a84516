"""Adaptive-moment optimizer, global-norm clipping and weight initializers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .tensor import DTYPE, Parameter, ShapeError

# Glorot-uniform bound: sqrt(INIT_GAIN / (fan_in + fan_out))
INIT_GAIN = 6.0


def glorot_uniform(fan_in: int, fan_out: int, shape: tuple, rng: np.random.Generator) -> np.ndarray:
    bound = np.sqrt(INIT_GAIN / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(DTYPE)


def scaled_uniform(shape: tuple, rng: np.random.Generator) -> np.ndarray:
    """Uniform init with the bound derived from the last two dimensions."""
    fan_in = shape[-2] if len(shape) > 1 else shape[0]
    fan_out = shape[-1]
    return glorot_uniform(fan_in, fan_out, shape, rng)


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(parameters: Sequence[Parameter], gradients: Sequence[np.ndarray | None],
              state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update.  Frozen parameters are skipped."""
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g in zip(parameters, gradients):
        if p.frozen or g is None:
            continue
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient {g.shape} does not match parameter {p.name!r} {p.data.shape}")
        key = id(p)
        m = state.m.get(key)
        if m is None:
            m = state.m[key] = np.zeros_like(p.data)
            state.v[key] = np.zeros_like(p.data)
        v = state.v[key]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def clip_grad_norm(parameters: Iterable[Parameter], max_norm: float) -> float:
    """Rescale gradients in place so their global L2 norm is at most ``max_norm``."""
    params = [p for p in parameters if p.grad is not None and not p.frozen]
    total = float(np.sqrt(sum(float((p.grad * p.grad).sum()) for p in params)))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params:
            p.grad = p.grad * scale
    return total


class Adam:
    """Stateful wrapper around :func:`adam_step`."""

    def __init__(self, parameters: Iterable[Parameter], lr: float = 1e-3, clip: float | None = None):
        self.parameters = list(parameters)
        self.lr = lr
        self.clip = clip
        self.state = AdamState()

    def zero_grad(self) -> None:
        for p in self.parameters:
            p.grad = None

    def step(self) -> float | None:
        norm = clip_grad_norm(self.parameters, self.clip) if self.clip else None
        adam_step(self.parameters, [p.grad for p in self.parameters], self.state, self.lr)
        return norm
