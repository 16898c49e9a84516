from __future__ import annotations

import numpy as np

from ..autodiff import Parameter, Tensor, glorot_uniform, ops
from .layers import Module


class Conv1d(Module):
    """Same-length 1-D convolution over the sequence axis of ``(B, n, d)`` inputs.

    Output ``c_i`` sees ``g[i - r : i + r]`` with ``r = (h - 1) // 2``; the
    borders are zero padded.
    """

    def __init__(self, d_in: int, channels: int, kernel_size: int, rng: np.random.Generator):
        if kernel_size < 1 or kernel_size % 2 == 0:
            raise ValueError(f"kernel size must be a positive odd integer, got {kernel_size}")
        self.kernel_size = kernel_size
        self.weight = Parameter(
            glorot_uniform(kernel_size * d_in, channels, (kernel_size * d_in, channels), rng),
            name="weight")
        self.bias = Parameter(np.zeros(channels), name="bias")

    def __call__(self, x: Tensor, mask: np.ndarray | None = None) -> Tensor:
        h = self.kernel_size
        n = x.shape[1]
        if mask is not None:
            # padded batch positions must look like the zero border
            x = x * mask[..., None].astype(np.float64)
        if h == 1:
            return x @ self.weight + self.bias
        r = (h - 1) // 2
        xp = ops.pad(x, r, r, axis=1)
        windows = ops.concat([xp[:, j:j + n, :] for j in range(h)], axis=-1)
        return windows @ self.weight + self.bias

