"""Linear-chain CRF: forward algorithm, NLL with marginal-based gradients, Viterbi.

Path score for labels ``y`` over ``n`` positions::

    start[y_0] + sum_i emissions[i, y_i] + sum_i transitions[y_i, y_{i+1}] + end[y_{n-1}]
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autodiff import Parameter, Tensor
from .autodiff.tensor import make_node
from .encoders.layers import Module

# additive penalty for transitions ruled out by the optional BIO mask
INVALID_SCORE = -1e4


class CrfError(ValueError):
    pass


def _lse(x: np.ndarray, axis: int) -> np.ndarray:
    m = x.max(axis=axis, keepdims=True)
    return np.squeeze(m, axis) + np.log(np.exp(x - m).sum(axis=axis))


@dataclass
class CrfParams:
    transitions: np.ndarray  # (L, L): score of label j following label i
    start: np.ndarray        # (L,)
    end: np.ndarray          # (L,)

    def __post_init__(self):
        self.transitions = np.asarray(self.transitions, dtype=np.float64)
        self.start = np.asarray(self.start, dtype=np.float64)
        self.end = np.asarray(self.end, dtype=np.float64)
        L = self.start.shape[0]
        if self.transitions.shape != (L, L) or self.end.shape != (L,):
            raise CrfError(f"inconsistent CRF shapes: transitions {self.transitions.shape}, "
                           f"start {self.start.shape}, end {self.end.shape}")
        for name in ("transitions", "start", "end"):
            if not np.isfinite(getattr(self, name)).all():
                raise CrfError(f"non-finite entries in CRF {name}")

    @property
    def num_labels(self) -> int:
        return self.start.shape[0]

    @classmethod
    def zeros(cls, num_labels: int) -> "CrfParams":
        return cls(np.zeros((num_labels, num_labels)), np.zeros(num_labels), np.zeros(num_labels))

    @classmethod
    def random(cls, num_labels: int, rng: np.random.Generator, scale: float = 1.0) -> "CrfParams":
        return cls(rng.normal(0, scale, (num_labels, num_labels)),
                   rng.normal(0, scale, num_labels), rng.normal(0, scale, num_labels))


def _check(emissions: np.ndarray, params: CrfParams) -> np.ndarray:
    emissions = np.asarray(emissions, dtype=np.float64)
    if emissions.ndim != 2 or emissions.shape[0] == 0:
        raise CrfError(f"emissions must be a non-empty (n, L) matrix, got shape {emissions.shape}")
    if emissions.shape[1] != params.num_labels:
        raise CrfError(f"emissions have {emissions.shape[1]} labels, CRF has {params.num_labels}")
    return emissions


def path_score(emissions: np.ndarray, labels: Sequence[int], params: CrfParams) -> float:
    emissions = _check(emissions, params)
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (emissions.shape[0],):
        raise CrfError(f"{len(y)} labels for {emissions.shape[0]} positions")
    if (y < 0).any() or (y >= params.num_labels).any():
        raise CrfError(f"label index out of range [0, {params.num_labels})")
    score = params.start[y[0]] + params.end[y[-1]] + emissions[np.arange(len(y)), y].sum()
    score += params.transitions[y[:-1], y[1:]].sum()
    return float(score)


def forward_scores(emissions: np.ndarray, params: CrfParams) -> np.ndarray:
    """Forward log-potentials ``alpha[i, y]`` (log-sum over prefixes ending in ``y`` at ``i``)."""
    emissions = _check(emissions, params)
    n = emissions.shape[0]
    alpha = np.empty_like(emissions)
    alpha[0] = params.start + emissions[0]
    for i in range(1, n):
        alpha[i] = _lse(alpha[i - 1][:, None] + params.transitions, axis=0) + emissions[i]
    return alpha


def backward_scores(emissions: np.ndarray, params: CrfParams) -> np.ndarray:
    emissions = _check(emissions, params)
    n = emissions.shape[0]
    beta = np.empty_like(emissions)
    beta[-1] = params.end
    for i in range(n - 2, -1, -1):
        beta[i] = _lse(params.transitions + (emissions[i + 1] + beta[i + 1])[None, :], axis=1)
    return beta


def log_partition(emissions: np.ndarray, params: CrfParams) -> float:
    alpha = forward_scores(emissions, params)
    return float(_lse(alpha[-1] + params.end, axis=0))


def nll(emissions: np.ndarray, gold_labels: Sequence[int], params: CrfParams) -> float:
    """``log Z - score(gold)``; non-negative up to rounding."""
    gold = path_score(emissions, gold_labels, params)
    return log_partition(emissions, params) - gold


def marginals(emissions: np.ndarray, params: CrfParams) -> tuple[np.ndarray, np.ndarray, float]:
    """Node marginals ``(n, L)``, edge marginals ``(n-1, L, L)`` and ``log Z``."""
    emissions = _check(emissions, params)
    alpha = forward_scores(emissions, params)
    beta = backward_scores(emissions, params)
    log_z = float(_lse(alpha[-1] + params.end, axis=0))
    node = np.exp(alpha + beta - log_z)
    edge = np.exp(alpha[:-1, :, None] + params.transitions[None]
                  + (emissions[1:] + beta[1:])[:, None, :] - log_z)
    return node, edge, log_z


def viterbi(emissions: np.ndarray, params: CrfParams) -> tuple[list[int], float]:
    """Highest-scoring path.  Ties go to the lowest label index at every step."""
    emissions = _check(emissions, params)
    n, L = emissions.shape
    score = params.start + emissions[0]
    back = np.zeros((n, L), dtype=np.int64)
    for i in range(1, n):
        cand = score[:, None] + params.transitions
        back[i] = cand.argmax(axis=0)
        score = cand[back[i], np.arange(L)] + emissions[i]
    final = score + params.end
    best = int(final.argmax())
    path = [best]
    for i in range(n - 1, 0, -1):
        best = int(back[i, best])
        path.append(best)
    path.reverse()
    return path, float(final.max())


# ---------------------------------------------------------------------------
# batched routines used during training and prediction


def _batched_alpha_beta(em: np.ndarray, lengths: np.ndarray, trans: np.ndarray,
                        start: np.ndarray, end: np.ndarray):
    B, n, L = em.shape
    alpha = np.empty_like(em)
    alpha[:, 0] = start + em[:, 0]
    for t in range(1, n):
        step = _lse(alpha[:, t - 1, :, None] + trans[None], axis=1) + em[:, t]
        alpha[:, t] = np.where((t < lengths)[:, None], step, alpha[:, t - 1])
    beta = np.empty_like(em)
    beta[:, n - 1] = end
    for t in range(n - 2, -1, -1):
        step = _lse(trans[None] + (em[:, t + 1] + beta[:, t + 1])[:, None, :], axis=2)
        beta[:, t] = np.where((t < lengths - 1)[:, None], step, end[None, :])
    last = alpha[np.arange(B), lengths - 1]
    log_z = _lse(last + end, axis=1)
    return alpha, beta, log_z


def batched_nll(em: np.ndarray, tags: np.ndarray, lengths: np.ndarray, trans: np.ndarray,
                start: np.ndarray, end: np.ndarray, with_grad: bool = True):
    """Per-sequence NLL for a padded batch, plus gradients of their sum."""
    B, n, L = em.shape
    lengths = np.asarray(lengths, dtype=np.int64)
    tags = np.asarray(tags, dtype=np.int64)
    if (lengths < 1).any():
        raise CrfError("empty sequence in batch")
    mask = np.arange(n)[None, :] < lengths[:, None]
    safe_tags = np.where(mask, tags, 0)
    if (safe_tags < 0).any() or (safe_tags >= L).any():
        raise CrfError(f"label index out of range [0, {L})")
    em = np.where(mask[..., None], em, 0.0)
    rows = np.arange(B)
    last_tag = safe_tags[rows, lengths - 1]
    gold = start[safe_tags[:, 0]] + end[last_tag]
    gold = gold + (np.take_along_axis(em, safe_tags[..., None], axis=2)[..., 0] * mask).sum(axis=1)
    pair_mask = mask[:, 1:]
    gold = gold + (trans[safe_tags[:, :-1], safe_tags[:, 1:]] * pair_mask).sum(axis=1)

    alpha, beta, log_z = _batched_alpha_beta(em, lengths, trans, start, end)
    losses = log_z - gold
    if not with_grad:
        return losses, None

    node_arg = alpha + beta - log_z[:, None, None]
    node = np.exp(np.where(mask[..., None], node_arg, -np.inf))
    edge_arg = (alpha[:, :-1, :, None] + trans[None, None]
                + (em[:, 1:] + beta[:, 1:])[:, :, None, :] - log_z[:, None, None, None])
    edge = np.exp(np.where(pair_mask[..., None, None], edge_arg, -np.inf))
    onehot = np.zeros_like(em)
    np.put_along_axis(onehot, safe_tags[..., None], 1.0, axis=2)
    onehot *= mask[..., None]

    g_em = node - onehot
    g_trans = edge.sum(axis=(0, 1))
    np.add.at(g_trans, (safe_tags[:, :-1][pair_mask], safe_tags[:, 1:][pair_mask]), -1.0)
    g_start = node[:, 0].sum(axis=0)
    np.add.at(g_start, safe_tags[:, 0], -1.0)
    g_end = node[rows, lengths - 1].sum(axis=0)
    np.add.at(g_end, last_tag, -1.0)
    return losses, (g_em, g_trans, g_start, g_end)


def batched_viterbi(em: np.ndarray, lengths: np.ndarray, trans: np.ndarray,
                    start: np.ndarray, end: np.ndarray) -> list[list[int]]:
    B, n, L = em.shape
    lengths = np.asarray(lengths, dtype=np.int64)
    score = start + em[:, 0]
    back = np.zeros((B, n, L), dtype=np.int64)
    for t in range(1, n):
        cand = score[:, :, None] + trans[None]
        idx = cand.argmax(axis=1)
        best = np.take_along_axis(cand, idx[:, None, :], axis=1)[:, 0] + em[:, t]
        active = (t < lengths)[:, None]
        back[:, t] = idx
        score = np.where(active, best, score)
    final = score + end
    paths = []
    for b in range(B):
        y = int(final[b].argmax())
        path = [y]
        for t in range(lengths[b] - 1, 0, -1):
            y = int(back[b, t, y])
            path.append(y)
        path.reverse()
        paths.append(path)
    return paths


def crf_nll(emissions: Tensor, tags: np.ndarray, lengths: np.ndarray,
            transitions: Tensor, start: Tensor, end: Tensor) -> Tensor:
    """Differentiable summed NLL over a padded batch ``(B, n, L)``."""
    losses, grads = batched_nll(emissions.data, tags, lengths, transitions.data,
                                start.data, end.data)

    def backward(g):
        scale = float(g)
        return tuple(scale * x for x in grads)
    return make_node(np.asarray(losses.sum()), (emissions, transitions, start, end),
                     backward, "crf_nll")


# ---------------------------------------------------------------------------
# BIO validity mask (off by default)


def bio_allowed(labels: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Boolean ``(allowed_transitions, allowed_start)`` for BIO label strings.

    ``I-X`` may only follow ``B-X`` or ``I-X`` and may not start a sequence.
    """
    L = len(labels)
    trans = np.ones((L, L), dtype=bool)
    start = np.ones(L, dtype=bool)
    for j, lab in enumerate(labels):
        if not lab.startswith("I-"):
            continue
        kind = lab[2:]
        start[j] = False
        for i, prev in enumerate(labels):
            trans[i, j] = prev in (f"B-{kind}", f"I-{kind}")
    return trans, start


class CRF(Module):
    """CRF head with trainable transition, start and end scores."""

    def __init__(self, num_labels: int, rng: np.random.Generator | None = None,
                 allowed: tuple[np.ndarray, np.ndarray] | None = None):
        rng = rng or np.random.default_rng(0)
        bound = 0.1
        self.transitions = Parameter(rng.uniform(-bound, bound, (num_labels, num_labels)),
                                     name="crf.transitions")
        self.start = Parameter(np.zeros(num_labels), name="crf.start")
        self.end = Parameter(np.zeros(num_labels), name="crf.end")
        self.allowed = allowed

    def _penalties(self) -> tuple[np.ndarray, np.ndarray]:
        if self.allowed is None:
            return 0.0, 0.0
        trans_ok, start_ok = self.allowed
        return np.where(trans_ok, 0.0, INVALID_SCORE), np.where(start_ok, 0.0, INVALID_SCORE)

    def loss(self, emissions: Tensor, tags: np.ndarray, lengths: np.ndarray) -> Tensor:
        tp, sp = self._penalties()
        trans, start = self.transitions, self.start
        if self.allowed is not None:
            trans, start = trans + tp, start + sp
        return crf_nll(emissions, tags, lengths, trans, start, self.end)

    def params(self) -> CrfParams:
        tp, sp = self._penalties()
        return CrfParams(self.transitions.data + tp, self.start.data + sp, self.end.data)

    def decode(self, emissions: np.ndarray, lengths: np.ndarray) -> list[list[int]]:
        p = self.params()
        return batched_viterbi(emissions, lengths, p.transitions, p.start, p.end)
