from __future__ import annotations

import numpy as np

from ..autodiff import Parameter, Tensor, ops, scaled_uniform
from .layers import Module


class LSTM(Module):
    """Single-direction LSTM; gate order in the fused weights is (input, forget, cell, output)."""

    def __init__(self, d_in: int, hidden: int, rng: np.random.Generator):
        self.hidden = hidden
        self.w_in = Parameter(scaled_uniform((d_in, 4 * hidden), rng), name="w_in")
        self.w_rec = Parameter(scaled_uniform((hidden, 4 * hidden), rng), name="w_rec")
        self.bias = Parameter(np.zeros(4 * hidden), name="bias")

    def __call__(self, x: Tensor) -> Tensor:
        B, n, _ = x.shape
        H = self.hidden
        xw = x @ self.w_in + self.bias
        h = Tensor(np.zeros((B, H)))
        c = Tensor(np.zeros((B, H)))
        outputs = []
        for t in range(n):
            z = xw[:, t] + h @ self.w_rec
            i = ops.sigmoid(z[:, :H])
            f = ops.sigmoid(z[:, H:2 * H])
            g = ops.tanh(z[:, 2 * H:3 * H])
            o = ops.sigmoid(z[:, 3 * H:])
            c = f * c + i * g
            h = o * ops.tanh(c)
            outputs.append(h)
        return ops.stack(outputs, axis=1)


def reverse_index(lengths: np.ndarray, n: int) -> np.ndarray:
    """Per-row time index reversing the first ``lengths[b]`` steps; padding stays put."""
    t = np.arange(n)[None, :]
    lengths = np.asarray(lengths)[:, None]
    return np.where(t < lengths, lengths - 1 - t, t)


class BiLSTM(Module):
    """Concatenation of a forward and a length-aware backward LSTM, each ``d_out / 2`` wide."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        if d_out % 2:
            raise ValueError(f"BiLSTM output width must be even, got {d_out}")
        self.fwd = LSTM(d_in, d_out // 2, rng)
        self.bwd = LSTM(d_in, d_out // 2, rng)

    def __call__(self, x: Tensor, mask: np.ndarray | None = None) -> Tensor:
        B, n, _ = x.shape
        lengths = np.full(B, n) if mask is None else mask.sum(axis=1)
        rows = np.arange(B)[:, None]
        rev = reverse_index(lengths, n)
        forward = self.fwd(x)
        backward = self.bwd(x[rows, rev])[rows, rev]
        return ops.concat([forward, backward], axis=-1)
