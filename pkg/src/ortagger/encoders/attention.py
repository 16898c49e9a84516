"""Multi-head self-attention, with optional clipped relative-position keys."""

from __future__ import annotations

import numpy as np

from ..autodiff import Parameter, Tensor, ops, scaled_uniform
from .layers import Linear, Module

MASK_BIAS = -1e9


def key_mask_bias(mask: np.ndarray | None) -> np.ndarray | None:
    """Additive ``(B, 1, 1, n)`` bias that removes padded keys from the softmax."""
    if mask is None:
        return None
    return np.where(mask, 0.0, MASK_BIAS)[:, None, None, :]


def relative_index(n: int, clip: int) -> np.ndarray:
    """``idx[i, j] = clip(j - i, -clip, clip) + clip``."""
    offsets = np.arange(n)[None, :] - np.arange(n)[:, None]
    return np.clip(offsets, -clip, clip) + clip


class MultiHeadAttention(Module):
    def __init__(self, d_model: int, num_heads: int, rng: np.random.Generator):
        if d_model % num_heads:
            raise ValueError(f"d_model={d_model} not divisible by num_heads={num_heads}")
        self.num_heads = num_heads
        self.d_head = d_model // num_heads
        self.q = Linear(d_model, d_model, rng)
        self.k = Linear(d_model, d_model, rng)
        self.v = Linear(d_model, d_model, rng)
        self.o = Linear(d_model, d_model, rng)

    def _split(self, x: Tensor) -> Tensor:
        B, n, _ = x.shape
        return x.reshape(B, n, self.num_heads, self.d_head).transpose(0, 2, 1, 3)

    def _logits(self, q: Tensor, k: Tensor) -> Tensor:
        return (q @ k.swapaxes(-1, -2)) * (1.0 / np.sqrt(self.d_head))

    def __call__(self, x: Tensor, mask: np.ndarray | None = None) -> Tensor:
        B, n, d = x.shape
        q, k, v = self._split(self.q(x)), self._split(self.k(x)), self._split(self.v(x))
        logits = self._logits(q, k)
        bias = key_mask_bias(mask)
        if bias is not None:
            logits = logits + bias
        attn = ops.softmax(logits, axis=-1)
        out = (attn @ v).transpose(0, 2, 1, 3).reshape(B, n, d)
        return self.o(out)


class RelativeMultiHeadAttention(MultiHeadAttention):
    """Self-attention whose keys carry a learned embedding of the clipped offset ``j - i``.

    ``logit[i, j] = q_i . (k_j + r[clip(j - i)]) / sqrt(d_head)``; the offset
    table is shared across heads.
    """

    def __init__(self, d_model: int, num_heads: int, clip_distance: int, rng: np.random.Generator):
        if clip_distance < 1:
            raise ValueError(f"clip distance must be >= 1, got {clip_distance}")
        super().__init__(d_model, num_heads, rng)
        self.clip = clip_distance
        self.rel_keys = Parameter(scaled_uniform((2 * clip_distance + 1, self.d_head), rng),
                                  name="rel_keys")

    def _logits(self, q: Tensor, k: Tensor) -> Tensor:
        B, H, n, _ = q.shape
        content = q @ k.swapaxes(-1, -2)
        per_offset = q @ self.rel_keys.transpose()  # (B, H, n, 2c+1)
        idx = np.broadcast_to(relative_index(n, self.clip), (B, H, n, n))
        rel = ops.gather_last(per_offset, idx)
        return (content + rel) * (1.0 / np.sqrt(self.d_head))
