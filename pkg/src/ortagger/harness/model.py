"""Sequence tagger: frozen word embeddings -> encoder -> emission scores -> CRF or softmax head."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from ..autodiff import Parameter, Tensor, no_grad, ops
from ..crf import CRF, bio_allowed
from ..data import EmbeddingMatrix, LabeledSequence, LabelSet, Vocab
from ..encoders import Encoder, EncoderConfig, Linear, Module


@dataclass
class Batch:
    ids: np.ndarray      # (B, n) vocabulary ids, PAD = 0
    mask: np.ndarray     # (B, n) bool
    lengths: np.ndarray  # (B,)
    tags: np.ndarray | None  # (B, n) label ids, 0 on padding


class Tagger(Module):
    def __init__(self, encoder_cfg: EncoderConfig, head: str, vocab: Vocab, labels: LabelSet,
                 embeddings: EmbeddingMatrix, rng: np.random.Generator,
                 external_pe: np.ndarray | None = None, bio_mask: bool = False):
        self.vocab = vocab
        self.labels = labels
        self.head = head
        self.embed = Parameter(embeddings.matrix, name="embeddings", frozen=embeddings.frozen)
        self.encoder = Encoder(encoder_cfg, embeddings.dim, rng, external_pe)
        self.emit = Linear(encoder_cfg.d_model, len(labels), rng)
        allowed = bio_allowed(labels.itos) if bio_mask else None
        self.crf = CRF(len(labels), rng, allowed) if head == "crf" else None
        self.bio_mask = bio_mask

    @property
    def cfg(self) -> EncoderConfig:
        return self.encoder.cfg

    def make_batch(self, seqs: Sequence[LabeledSequence], with_tags: bool = True) -> Batch:
        lengths = np.array([len(s) for s in seqs], dtype=np.int64)
        n = int(lengths.max())
        ids = np.zeros((len(seqs), n), dtype=np.int64)
        tags = np.zeros((len(seqs), n), dtype=np.int64) if with_tags else None
        for i, s in enumerate(seqs):
            ids[i, :len(s)] = self.vocab.encode(s.tokens)
            if with_tags:
                tags[i, :len(s)] = self.labels.encode(s.labels)
        mask = np.arange(n)[None, :] < lengths[:, None]
        return Batch(ids, mask, lengths, tags)

    def emissions(self, batch: Batch, training: bool = False,
                  rng: np.random.Generator | None = None) -> Tensor:
        x = ops.embedding(self.embed, batch.ids)
        feats = self.encoder(x, batch.mask, training=training, rng=rng)
        return self.emit(feats)

    def loss(self, batch: Batch, training: bool = True, rng: np.random.Generator | None = None) -> Tensor:
        """Mean per-sentence negative log-likelihood."""
        em = self.emissions(batch, training, rng)
        if self.crf is not None:
            total = self.crf.loss(em, batch.tags, batch.lengths)
        else:
            total = ops.cross_entropy(em, batch.tags, batch.mask)
        return total * (1.0 / len(batch.lengths))

    def decode(self, batch: Batch) -> list[list[int]]:
        with no_grad():
            em = self.emissions(batch).data
        if self.crf is not None:
            return self.crf.decode(em, batch.lengths)
        best = em.argmax(axis=-1)
        return [best[i, :L].tolist() for i, L in enumerate(batch.lengths)]

    def predict(self, seqs: Sequence[LabeledSequence], batch_size: int = 64) -> list[list[str]]:
        out: list[list[str]] = []
        for i in range(0, len(seqs), batch_size):
            chunk = seqs[i:i + batch_size]
            if not chunk:
                continue
            batch = self.make_batch(chunk, with_tags=False)
            out.extend(self.labels.decode(p) for p in self.decode(batch))
        return out

    # -- persistence ---------------------------------------------------------
    def state(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = set(params) - set(state)
        if missing:
            raise ValueError(f"state is missing parameters: {sorted(missing)}")
        for name, p in params.items():
            if state[name].shape != p.data.shape:
                raise ValueError(f"shape mismatch for {name}: {state[name].shape} vs {p.data.shape}")
            p.data[...] = state[name]

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        np.savez(directory / "params.npz", **self.state())
        pe = self.encoder.pe
        meta = {
            "encoder": self.cfg.to_dict(),
            "head": self.head,
            "bio_mask": self.bio_mask,
            "vocab": self.vocab.to_list(),
            "labels": self.labels.itos,
            "embed_dim": int(self.embed.shape[1]),
            "embeddings_frozen": bool(self.embed.frozen),
            "external_pe": pe is not None and pe.source == "external",
        }
        (directory / "model.yaml").write_text(yaml.safe_dump(meta, sort_keys=False))

    @classmethod
    def load(cls, directory: str | Path) -> "Tagger":
        directory = Path(directory)
        meta = yaml.safe_load((directory / "model.yaml").read_text())
        state = dict(np.load(directory / "params.npz"))
        external = state["encoder.pe.matrix"] if meta.get("external_pe") else None
        cfg = EncoderConfig(**meta["encoder"])
        vocab = Vocab.from_list(meta["vocab"])
        labels = LabelSet.from_list(meta["labels"])
        emb = EmbeddingMatrix(state["embed"], frozen=meta["embeddings_frozen"])
        model = cls(cfg, meta["head"], vocab, labels, emb, np.random.default_rng(0),
                    external_pe=external, bio_mask=meta["bio_mask"])
        model.load_state(state)
        return model
