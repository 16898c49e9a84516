"""Span-level BIO scoring and token accuracy."""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Sequence


def extract_spans(labels: Sequence[str]) -> set[tuple[str, int, int]]:
    """``(type, start, end)`` for every ``B-X`` followed by its ``I-X`` run (end exclusive).

    ``I-X`` tokens that do not continue a span are ignored.
    """
    spans = set()
    i, n = 0, len(labels)
    while i < n:
        lab = labels[i]
        if lab.startswith("B-"):
            kind = lab[2:]
            j = i + 1
            while j < n and labels[j] == f"I-{kind}":
                j += 1
            spans.add((kind, i, j))
            i = j
        else:
            i += 1
    return spans


def _prf(correct: int, predicted: int, gold: int) -> tuple[float, float, float]:
    p = correct / predicted if predicted else 0.0
    r = correct / gold if gold else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


@dataclass
class LabelScore:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    accuracy: float
    per_label: dict[str, LabelScore] = field(default_factory=dict)
    dataset: str = ""
    seed: int | None = None
    fingerprint: str = ""
    sentences: int = 0
    tokens: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def summary_row(self) -> dict:
        return {"dataset": self.dataset, "sentences": self.sentences, "tokens": self.tokens,
                "precision": self.precision, "recall": self.recall, "f1": self.f1,
                "accuracy": self.accuracy, "seed": self.seed, "fingerprint": self.fingerprint}


def _check_lengths(predictions, gold) -> None:
    if len(predictions) != len(gold):
        raise ValueError(f"{len(predictions)} predicted sentences vs {len(gold)} gold")
    for i, (p, g) in enumerate(zip(predictions, gold)):
        if len(p) != len(g):
            raise ValueError(f"sentence {i}: {len(p)} predicted labels vs {len(g)} gold")


def evaluate_accuracy(predictions: Sequence[Sequence[str]], gold: Sequence[Sequence[str]]) -> float:
    _check_lengths(predictions, gold)
    total = sum(len(g) for g in gold)
    hits = sum(p == g for ps, gs in zip(predictions, gold) for p, g in zip(ps, gs))
    return hits / total if total else 0.0


def evaluate_span_f1(predictions: Sequence[Sequence[str]], gold: Sequence[Sequence[str]],
                     dataset: str = "", seed: int | None = None, fingerprint: str = "") -> EvalReport:
    """Exact-match (boundaries and type) span precision/recall/F1 plus token accuracy."""
    _check_lengths(predictions, gold)
    correct, n_pred, n_gold = Counter(), Counter(), Counter()
    for p, g in zip(predictions, gold):
        ps, gs = extract_spans(p), extract_spans(g)
        for kind, *_ in ps:
            n_pred[kind] += 1
        for kind, *_ in gs:
            n_gold[kind] += 1
        for kind, *_ in ps & gs:
            correct[kind] += 1
    P, R, F = _prf(sum(correct.values()), sum(n_pred.values()), sum(n_gold.values()))
    per_label = {}
    for kind in sorted(set(n_pred) | set(n_gold)):
        p, r, f = _prf(correct[kind], n_pred[kind], n_gold[kind])
        per_label[kind] = LabelScore(p, r, f, n_gold[kind])
    return EvalReport(P, R, F, evaluate_accuracy(predictions, gold), per_label,
                      dataset=dataset, seed=seed, fingerprint=fingerprint,
                      sentences=len(gold), tokens=sum(len(g) for g in gold))


def evaluate_tags(predictions, gold, dataset: str = "", seed: int | None = None,
                  fingerprint: str = "") -> EvalReport:
    """Accuracy report for plain-tag data, with per-tag accuracy in ``per_label``."""
    _check_lengths(predictions, gold)
    hits, support, predicted = Counter(), Counter(), Counter()
    for ps, gs in zip(predictions, gold):
        for p, g in zip(ps, gs):
            support[g] += 1
            predicted[p] += 1
            if p == g:
                hits[g] += 1
    per_label = {tag: LabelScore(*_prf(hits[tag], predicted[tag], support[tag]), support[tag])
                 for tag in sorted(set(support) | set(predicted))}
    acc = evaluate_accuracy(predictions, gold)
    return EvalReport(acc, acc, acc, acc, per_label, dataset=dataset, seed=seed,
                      fingerprint=fingerprint, sentences=len(gold), tokens=sum(len(g) for g in gold))
