"""Token vocabularies, label inventories and word-vector loading."""

from __future__ import annotations

import io
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from .sequence import LabeledSequence

log = logging.getLogger(__name__)

PAD = "<pad>"
UNK = "<unk>"


class EmbeddingError(ValueError):
    pass


class Vocab:
    """Bijective token <-> index map with reserved PAD (0) and UNK (1). Case is preserved."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = [PAD, UNK]
        self.stoi: dict[str, int] = {PAD: 0, UNK: 1}
        for tok in tokens:
            self.add(tok)

    pad_index = 0
    unk_index = 1

    def add(self, token: str) -> int:
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def index(self, token: str) -> int:
        return self.stoi.get(token, self.unk_index)

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.index(t) for t in tokens], dtype=np.int64)

    def to_list(self) -> list[str]:
        return list(self.itos[2:])

    @classmethod
    def from_list(cls, tokens: Sequence[str]) -> "Vocab":
        return cls(tokens)


def build_vocab(dataset: Iterable[LabeledSequence], min_count: int = 1) -> Vocab:
    """Index tokens seen at least ``min_count`` times, by frequency then lexicographically."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = Counter(tok for seq in dataset for tok in seq.tokens)
    ordered = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    return Vocab(ordered)


class LabelSet:
    """Label inventory; ``O`` (when present) is index 0 so all-zero paths mean "no entity"."""

    def __init__(self, labels: Iterable[str]):
        uniq = sorted(set(labels))
        if "O" in uniq:
            uniq.remove("O")
            uniq.insert(0, "O")
        self.itos = uniq
        self.stoi = {l: i for i, l in enumerate(uniq)}

    @classmethod
    def from_list(cls, itos: Sequence[str]) -> "LabelSet":
        """Restore an inventory with exactly this index order."""
        out = cls(())
        out.itos = list(itos)
        out.stoi = {l: i for i, l in enumerate(out.itos)}
        return out

    @classmethod
    def from_datasets(cls, *datasets: Iterable[LabeledSequence]) -> "LabelSet":
        return cls(l for ds in datasets for seq in ds for l in seq.labels)

    def __len__(self) -> int:
        return len(self.itos)

    def encode(self, labels: Sequence[str]) -> np.ndarray:
        try:
            return np.array([self.stoi[l] for l in labels], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"unknown label {exc.args[0]!r}") from None

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.itos[i] for i in ids]


@dataclass
class CoverageReport:
    vocab_size: int  # excluding reserved entries
    found: int
    missing: list[str] = field(default_factory=list)

    @property
    def coverage(self) -> float:
        return 1.0 if self.vocab_size == 0 else self.found / self.vocab_size

    def __str__(self) -> str:
        return (f"embedding coverage {self.coverage:.1%} ({self.found}/{self.vocab_size}); "
                f"{len(self.missing)} tokens randomly initialized")


@dataclass
class EmbeddingMatrix:
    matrix: np.ndarray  # (V, d)
    frozen: bool = True
    coverage: CoverageReport | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def random_rows(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform rows with bound sqrt(3/d), i.e. unit expected squared norm."""
    bound = np.sqrt(3.0 / d)
    return rng.uniform(-bound, bound, size=(n, d))


def _read_vectors(stream: TextIO) -> tuple[dict[str, np.ndarray], int]:
    vectors: dict[str, np.ndarray] = {}
    dim = None
    for line_no, raw in enumerate(stream, start=1):
        parts = raw.rstrip("\n").split(" ")
        parts = [p for p in parts if p]
        if not parts:
            continue
        if line_no == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
            continue  # "V d" header
        token, values = parts[0], parts[1:]
        if not values:
            raise EmbeddingError(f"line {line_no}: token {token!r} has no vector (d = 0)")
        if dim is None:
            dim = len(values)
        elif len(values) != dim:
            raise EmbeddingError(f"line {line_no}: expected {dim} values, got {len(values)}")
        try:
            vectors[token] = np.array([float(v) for v in values])
        except ValueError:
            raise EmbeddingError(f"line {line_no}: non-numeric vector entry") from None
    if dim is None:
        raise EmbeddingError("embedding file contains no vectors")
    return vectors, dim


def load_embeddings(stream: TextIO | str, vocab: Vocab, seed: int = 0,
                    frozen: bool = True) -> EmbeddingMatrix:
    """Fill vocabulary rows from a ``token v1 ... vd`` text file.

    Tokens absent from the file get random rows and are listed in the
    coverage report.  The PAD row is zero.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    vectors, dim = _read_vectors(stream)
    rng = np.random.default_rng(seed)
    matrix = random_rows(len(vocab), dim, rng)
    matrix[vocab.pad_index] = 0.0
    missing = []
    for idx, tok in enumerate(vocab.itos):
        if idx == vocab.pad_index:
            continue
        if tok in vectors:
            matrix[idx] = vectors[tok]
        elif idx != vocab.unk_index:
            missing.append(tok)
    report = CoverageReport(len(vocab) - 2, len(vocab) - 2 - len(missing), missing)
    if missing:
        log.warning("%s", report)
    return EmbeddingMatrix(matrix, frozen=frozen, coverage=report)


def random_embeddings(vocab: Vocab, dim: int, seed: int = 0, normalize: bool = True,
                      frozen: bool = True) -> EmbeddingMatrix:
    """Random word vectors (unit-normalized by default), PAD row zero."""
    rng = np.random.default_rng(seed)
    matrix = rng.normal(size=(len(vocab), dim))
    if normalize:
        matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
    matrix[vocab.pad_index] = 0.0
    return EmbeddingMatrix(matrix, frozen=frozen)


def write_embeddings(emb: EmbeddingMatrix, vocab: Vocab, stream: TextIO, header: bool = True) -> None:
    if header:
        stream.write(f"{len(vocab) - 1} {emb.dim}\n")
    for idx, tok in enumerate(vocab.itos):
        if idx == vocab.pad_index:
            continue
        stream.write(tok + " " + " ".join(repr(float(v)) for v in emb.matrix[idx]) + "\n")
