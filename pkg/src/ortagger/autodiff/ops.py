"""Differentiable functions built on :mod:`ortagger.autodiff.tensor`."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import DTYPE, ShapeError, Tensor, ensure_tensor, make_node, unbroadcast


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return make_node(out, (a,), lambda g: (g * out,), "exp")


def log(a: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)
    return make_node(out, (a,), lambda g: (g / a.data,), "log")


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return make_node(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    # split by sign to avoid overflow in exp
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return make_node(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return make_node(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)
    return make_node(out, (a,), backward, "softmax")


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    m = a.data.max(axis=axis, keepdims=True)
    lse = m + np.log(np.exp(a.data - m).sum(axis=axis, keepdims=True))
    out = a.data - lse
    probs = np.exp(out)

    def backward(g):
        return (g - probs * g.sum(axis=axis, keepdims=True),)
    return make_node(out, (a,), backward, "log_softmax")


def logsumexp(a: Tensor, axis: int = -1, keepdims: bool = False) -> Tensor:
    m = a.data.max(axis=axis, keepdims=True)
    lse = m + np.log(np.exp(a.data - m).sum(axis=axis, keepdims=True))
    probs = np.exp(a.data - lse)
    out = lse if keepdims else np.squeeze(lse, axis=axis)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (g * probs,)
    return make_node(out, (a,), backward, "logsumexp")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [ensure_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {[t.shape for t in tensors]}") from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))
    return make_node(out, tensors, backward, "concat")


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [ensure_tensor(t) for t in tensors]
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"stack: {[t.shape for t in tensors]}") from exc

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))
    return make_node(out, tensors, backward, "stack")


def pad(a: Tensor, before: int, after: int, axis: int) -> Tensor:
    """Zero-pad ``a`` along one axis."""
    widths = [(0, 0)] * a.ndim
    widths[axis] = (before, after)
    out = np.pad(a.data, widths)
    length = a.shape[axis]

    def backward(g):
        idx = [slice(None)] * a.ndim
        idx[axis] = slice(before, before + length)
        return (g[tuple(idx)],)
    return make_node(out, (a,), backward, "pad")


def embedding(weight: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup ``weight[ids]`` with scatter-add backward."""
    ids = np.asarray(ids, dtype=np.int64)
    out = weight.data[ids]

    def backward(g):
        grad = np.zeros_like(weight.data)
        np.add.at(grad, ids.reshape(-1), g.reshape(-1, weight.shape[-1]))
        return (grad,)
    return make_node(out, (weight,), backward, "embedding")


def gather_last(a: Tensor, index: np.ndarray) -> Tensor:
    """``out[..., j] = a[..., index[..., j]]`` (``np.take_along_axis`` on the last axis)."""
    index = np.asarray(index, dtype=np.int64)
    out = np.take_along_axis(a.data, index, axis=-1)

    def backward(g):
        grad = np.zeros_like(a.data)
        lead = np.indices(index.shape)[:-1]
        np.add.at(grad, (*lead, index), g)
        return (grad,)
    return make_node(out, (a,), backward, "gather")


def where(mask: np.ndarray, a, b) -> Tensor:
    """Select from ``a`` where ``mask`` is true, else from ``b``.  ``mask`` is constant."""
    a, b = ensure_tensor(a), ensure_tensor(b)
    mask = np.asarray(mask, dtype=bool)
    out = np.where(mask, a.data, b.data)

    def backward(g):
        return (unbroadcast(np.where(mask, g, 0.0), a.shape),
                unbroadcast(np.where(mask, 0.0, g), b.shape))
    return make_node(out, (a, b), backward, "where")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def backward(g):
        gxhat = g * gamma.data
        gx = inv * (gxhat - gxhat.mean(axis=-1, keepdims=True)
                    - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True))
        ggamma = unbroadcast(g * xhat, gamma.shape)
        gbeta = unbroadcast(g, beta.shape)
        return gx, ggamma, gbeta
    return make_node(out, (x, gamma, beta), backward, "layer_norm")


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    if not training or rate <= 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return make_node(x.data * keep, (x,), lambda g: (g * keep,), "dropout")


def cross_entropy(logits: Tensor, targets: np.ndarray, mask: np.ndarray | None = None) -> Tensor:
    """Summed token-level negative log-likelihood of ``targets`` under ``softmax(logits)``."""
    logp = log_softmax(logits, axis=-1)
    picked = gather_last(logp, np.asarray(targets, dtype=np.int64)[..., None])
    picked = picked.reshape(picked.shape[:-1])
    if mask is not None:
        picked = picked * np.asarray(mask, dtype=DTYPE)
    return -picked.sum()
