"""Entity-preserving, k-constrained word-order shuffling.

Whole entities (a ``B-X`` token and its ``I-X`` run) move as single units.
The permutation over units is drawn by noise-sorting: unit ``i`` gets the
key ``i + U(0, k + 1)`` and units are stably sorted by key, which keeps every
unit within ``k`` positions of where it started.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data.sequence import LabeledSequence, is_bio

log = logging.getLogger(__name__)

INF = math.inf


def parse_k(value) -> float:
    """Accept ints, ``inf``/``infinity``/``∞``; reject negatives."""
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("inf", "infinity", "∞"):
            return INF
        value = int(v)
    if value is None:
        return INF
    if value != INF:
        value = int(value)
    if value < 0:
        raise ValueError(f"shuffle degree k must be >= 0, got {value}")
    return value


def format_k(k: float) -> str:
    return "inf" if k == INF else str(int(k))


@dataclass
class ShuffleSpec:
    k: float = INF
    copies: int = 10
    preserve_entities: bool = True
    seed: int = 0

    def __post_init__(self):
        self.k = parse_k(self.k)
        if self.copies < 0:
            raise ValueError(f"copies must be >= 0, got {self.copies}")

    def to_dict(self) -> dict:
        return {"k": format_k(self.k), "copies": self.copies,
                "preserve_entities": self.preserve_entities, "seed": self.seed}


@dataclass(frozen=True)
class ShuffleUnit:
    start: int  # token span [start, end)
    end: int
    labels: tuple[str, ...]
    orphan: bool = False  # an I-X run without its B-X

    def __len__(self) -> int:
        return self.end - self.start


def entity_group(sequence: LabeledSequence) -> list[ShuffleUnit]:
    """Partition tokens into shuffle units.

    BIO data: each ``B-X I-X ...`` run is one unit, every other token is its
    own unit.  An ``I-X`` with no preceding ``B-X``/``I-X`` starts a unit and
    is flagged ``orphan``.  Non-BIO (plain tag) data: one unit per token.
    """
    labels = sequence.labels
    n = len(labels)
    if not is_bio(labels):
        return [ShuffleUnit(i, i + 1, (labels[i],)) for i in range(n)]
    units: list[ShuffleUnit] = []
    i = 0
    while i < n:
        lab = labels[i]
        if lab == "O":
            units.append(ShuffleUnit(i, i + 1, (lab,)))
            i += 1
            continue
        kind = lab[2:]
        orphan = lab.startswith("I-")
        j = i + 1
        while j < n and labels[j] == f"I-{kind}":
            j += 1
        units.append(ShuffleUnit(i, j, tuple(labels[i:j]), orphan))
        if orphan:
            log.debug("orphan %s at token %d in %r", lab, i, sequence.tokens)
        i = j
    return units


def lint(sequence: LabeledSequence) -> list[str]:
    """Human-readable warnings for malformed BIO spans."""
    return [f"orphan {u.labels[0]} at token {u.start}" for u in entity_group(sequence) if u.orphan]


def constrained_permutation(n: int, k: float, rng: np.random.Generator) -> np.ndarray:
    """Order ``p`` such that ``[items[i] for i in p]`` moves no item more than ``k`` places.

    ``k = inf`` draws a uniform permutation; ``k = 0`` is the identity.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    k = parse_k(k)
    if k == INF:
        keys = rng.random(n)
    else:
        keys = np.arange(n) + rng.uniform(0.0, k + 1.0, size=n)
    return np.argsort(keys, kind="stable")


def _reassemble(sequence: LabeledSequence, units: Sequence[ShuffleUnit], order) -> LabeledSequence:
    tokens: list[str] = []
    labels: list[str] = []
    for u in (units[i] for i in order):
        tokens.extend(sequence.tokens[u.start:u.end])
        labels.extend(sequence.labels[u.start:u.end])
    return LabeledSequence(tokens, labels, meta=dict(sequence.meta))


def shuffle_sample(sequence: LabeledSequence, spec: ShuffleSpec,
                   rng: np.random.Generator) -> LabeledSequence:
    if spec.preserve_entities:
        units = entity_group(sequence)
    else:
        units = [ShuffleUnit(i, i + 1, (l,)) for i, l in enumerate(sequence.labels)]
    order = constrained_permutation(len(units), spec.k, rng)
    return _reassemble(sequence, units, order)


def _sample_rng(seed: int, index: int, salt: int = 0) -> np.random.Generator:
    # per-sample stream, independent of processing order
    return np.random.default_rng([seed, index, salt])


def expand_training_set(dataset: Sequence[LabeledSequence], spec: ShuffleSpec) -> list[LabeledSequence]:
    """Each original followed by ``spec.copies`` shuffled variants of it."""
    out: list[LabeledSequence] = []
    for idx, seq in enumerate(dataset):
        out.append(seq)
        rng = _sample_rng(spec.seed, idx)
        out.extend(shuffle_sample(seq, spec, rng) for _ in range(spec.copies))
    return out


def make_noisy_testset(dataset: Sequence[LabeledSequence], k: float, seed: int = 0) -> list[LabeledSequence]:
    """Replace every sample by one entity-preserving k-constrained shuffle."""
    k = parse_k(k)
    if k < 1:
        raise ValueError("noisy test sets need k >= 1")
    spec = ShuffleSpec(k=k, copies=1, preserve_entities=True, seed=seed)
    return [shuffle_sample(seq, spec, _sample_rng(seed, idx, 1)) for idx, seq in enumerate(dataset)]
