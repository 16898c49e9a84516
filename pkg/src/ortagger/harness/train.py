"""Data preparation, training with dev-based model selection, and evaluation."""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..augment import ShuffleSpec, expand_training_set
from ..autodiff import Adam, NumericError, backward
from ..data import (
    EmbeddingMatrix,
    LabeledSequence,
    LabelSet,
    Vocab,
    build_vocab,
    is_bio,
    load_embeddings,
    load_synth_spec,
    random_embeddings,
    read_conll,
    synth_corpus,
)
from ..encoders import ConfigError
from .config import ExperimentConfig
from .metrics import EvalReport, evaluate_span_f1, evaluate_tags
from .model import Tagger

log = logging.getLogger(__name__)


class DataError(ValueError):
    pass


@dataclass
class PreparedData:
    train: list[LabeledSequence]
    dev: list[LabeledSequence]
    test: list[LabeledSequence]
    targets: dict[str, list[LabeledSequence]]  # evaluation sets in target languages
    target_train: dict[str, list[LabeledSequence]]  # few-shot pools
    vocab: Vocab
    labels: LabelSet
    embeddings: EmbeddingMatrix
    external_pe: np.ndarray | None
    task: str  # "bio" or "tags"


def _read(path: str, what: str) -> list[LabeledSequence]:
    try:
        data = read_conll(path)
    except OSError as exc:
        raise DataError(f"cannot read {what} file {path}: {exc.strerror}") from None
    if not data:
        raise DataError(f"{what} file {path} contains no sentences")
    return data


def load_matrix(path: str) -> np.ndarray:
    """``.npy`` or whitespace-separated text, one row per position."""
    try:
        m = np.load(path) if str(path).endswith(".npy") else np.loadtxt(path, ndmin=2)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read positional matrix {path}: {exc}") from None
    return np.asarray(m, dtype=np.float64)


def prepare_data(cfg: ExperimentConfig) -> PreparedData:
    d = cfg.data
    targets: dict[str, list[LabeledSequence]] = {}
    target_train: dict[str, list[LabeledSequence]] = {}
    if d.synth is not None:
        spec = load_synth_spec(None if d.synth == "default" else d.synth)
        source, tgt = synth_corpus(spec)
        train, dev, test = source.train, source.dev, source.test
        names = [d.target] if d.target else list(tgt)
        for name in names:
            if name not in tgt:
                raise ConfigError(f"synthetic spec has no target language {name!r}; has {sorted(tgt)}")
            targets[name] = tgt[name].test
            target_train[name] = tgt[name].train
    else:
        train, dev = _read(d.train, "train"), _read(d.dev, "dev")
        test = _read(d.test, "test") if d.test else []
        targets = {name: _read(p, f"target {name}") for name, p in d.targets.items()}
        target_train = {name: _read(p, f"target-train {name}") for name, p in d.target_train.items()}

    everything = [train, dev, test, *targets.values(), *target_train.values()]
    labels = LabelSet.from_datasets(*everything)
    task = d.task or ("bio" if all(is_bio(s.labels) for s in train) else "tags")
    # word vectors are frozen, so indexing every split loses nothing and avoids UNK on test words
    vocab = build_vocab(s for ds in everything for s in ds)
    if d.embeddings:
        try:
            with open(d.embeddings, encoding="utf-8") as fh:
                emb = load_embeddings(fh, vocab, seed=d.embed_seed)
        except OSError as exc:
            raise DataError(f"cannot read embeddings {d.embeddings}: {exc.strerror}") from None
        if emb.coverage is not None and emb.coverage.missing:
            log.warning("%s", emb.coverage)
    else:
        emb = random_embeddings(vocab, d.embed_dim or cfg.encoder.d_model, seed=d.embed_seed)
    external = load_matrix(d.external_pe) if d.external_pe else None
    return PreparedData(train, dev, test, targets, target_train, vocab, labels, emb, external, task)


def fewshot_mix(pool: dict[str, list[LabeledSequence]], fraction: float, seed: int) -> list[LabeledSequence]:
    """Draw ``fraction`` of each target training pool (without replacement)."""
    out: list[LabeledSequence] = []
    if fraction <= 0:
        return out
    rng = np.random.default_rng([seed, 7])
    for name in sorted(pool):
        items = pool[name]
        take = int(round(fraction * len(items)))
        out.extend(items[i] for i in sorted(rng.choice(len(items), size=take, replace=False)))
    return out


def score(model: Tagger, data: Sequence[LabeledSequence], task: str, dataset: str = "",
          seed: int | None = None, fingerprint: str = "") -> EvalReport:
    pred = model.predict(list(data))
    gold = [list(s.labels) for s in data]
    fn = evaluate_span_f1 if task == "bio" else evaluate_tags
    return fn(pred, gold, dataset=dataset, seed=seed, fingerprint=fingerprint)


@dataclass
class EpochRecord:
    epoch: int
    steps: int
    train_loss: float
    dev_score: float
    seconds: float


@dataclass
class TrainingLog:
    epochs: list[EpochRecord] = field(default_factory=list)
    initial_loss: float = float("nan")
    best_epoch: int = 0
    best_dev: float = -1.0
    steps: int = 0
    stopped: str = ""
    train_size: int = 0
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def build_model(cfg: ExperimentConfig, data: PreparedData) -> Tagger:
    rng = np.random.default_rng([cfg.seed, 0])
    enc = dataclasses.replace(cfg.encoder)
    return Tagger(enc, cfg.head, data.vocab, data.labels, data.embeddings, rng,
                  external_pe=data.external_pe, bio_mask=cfg.bio_mask)


def training_set(cfg: ExperimentConfig, data: PreparedData) -> list[LabeledSequence]:
    train = list(data.train) + fewshot_mix(data.target_train, cfg.fewshot_target_fraction, cfg.seed)
    if cfg.shuffle is not None and cfg.shuffle.copies > 0:
        spec = dataclasses.replace(cfg.shuffle, seed=cfg.shuffle.seed * 1_000_003 + cfg.seed)
        train = expand_training_set(train, spec)
    return train


def train(cfg: ExperimentConfig, data: PreparedData | None = None) -> tuple[Tagger, TrainingLog]:
    """Adam on mean per-sentence NLL; keeps the parameters with the best dev score.

    Raises :class:`NumericError` (with the step number in the message) when a
    non-finite value appears.
    """
    cfg.validate()
    data = data or prepare_data(cfg)
    model = build_model(cfg, data)
    train_set = training_set(cfg, data)
    o = cfg.optim
    opt = Adam(model.trainable_parameters(), lr=o.lr, clip=o.clip)
    order_rng = np.random.default_rng([cfg.seed, 1])
    dropout_rng = np.random.default_rng([cfg.seed, 2])
    tlog = TrainingLog(train_size=len(train_set))
    best_state = model.state()
    bad_epochs = 0
    start = time.perf_counter()
    for epoch in range(1, o.epochs + 1):
        t0 = time.perf_counter()
        perm = order_rng.permutation(len(train_set))
        losses = []
        for b in range(0, len(perm), o.batch_size):
            batch = model.make_batch([train_set[i] for i in perm[b:b + o.batch_size]])
            try:
                loss = model.loss(batch, training=True, rng=dropout_rng)
                opt.zero_grad()
                backward(loss)
                opt.step()
            except NumericError as exc:
                raise NumericError(exc.op, f"epoch {epoch}, step {tlog.steps + 1}: {exc.detail}") from exc
            if tlog.steps == 0:
                tlog.initial_loss = loss.item()
            losses.append(loss.item())
            tlog.steps += 1
            if o.max_steps is not None and tlog.steps >= o.max_steps:
                break
        dev = score(model, data.dev, data.task).f1
        tlog.epochs.append(EpochRecord(epoch, tlog.steps, float(np.mean(losses)), dev,
                                       time.perf_counter() - t0))
        log.info("epoch %d  loss %.4f  dev %.4f", epoch, np.mean(losses), dev)
        if dev > tlog.best_dev:
            tlog.best_dev, tlog.best_epoch = dev, epoch
            best_state = model.state()
            bad_epochs = 0
        else:
            bad_epochs += 1
        if o.max_steps is not None and tlog.steps >= o.max_steps:
            tlog.stopped = "max_steps"
            break
        if bad_epochs >= o.patience:
            tlog.stopped = "patience"
            break
    else:
        tlog.stopped = "epochs"
    model.load_state(best_state)
    tlog.seconds = time.perf_counter() - start
    return model, tlog


def evaluate(model: Tagger, cfg: ExperimentConfig, data: PreparedData) -> dict[str, EvalReport]:
    """Reports on source dev/test, every target set, and noisy copies of the source test set."""
    from ..augment import format_k, make_noisy_testset

    fp = cfg.fingerprint()
    reports = {"dev": score(model, data.dev, data.task, "dev", cfg.seed, fp)}
    if data.test:
        reports["test"] = score(model, data.test, data.task, "test", cfg.seed, fp)
        for k in cfg.noisy_k:
            name = f"noisy_k{format_k(float(k) if str(k) == 'inf' else int(k))}"
            noisy = make_noisy_testset(data.test, k, seed=cfg.seed)
            reports[name] = score(model, noisy, data.task, name, cfg.seed, fp)
    for name, ds in data.targets.items():
        reports[f"target:{name}"] = score(model, ds, data.task, f"target:{name}", cfg.seed, fp)
    return reports


def save_run(model: Tagger, cfg: ExperimentConfig, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    model.save(out / "model")
    (out / "config.yaml").write_text(cfg.to_yaml())
    return out
