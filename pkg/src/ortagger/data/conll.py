"""CoNLL column files: token in the first column, label in the last, blank line between sentences."""

from __future__ import annotations

import io
from pathlib import Path
from typing import Iterable, TextIO

from .sequence import LabeledSequence

DOCSTART = "-DOCSTART-"


class ConllError(ValueError):
    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


def parse_conll(stream: TextIO | Iterable[str] | str) -> list[LabeledSequence]:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    dataset: list[LabeledSequence] = []
    tokens: list[str] = []
    labels: list[str] = []
    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            if tokens:
                dataset.append(LabeledSequence(tokens, labels))
                tokens, labels = [], []
            continue
        if line.startswith(DOCSTART):
            continue
        cols = line.split()
        if len(cols) < 2:
            raise ConllError(line_no, f"expected at least 2 columns, got {len(cols)}: {line!r}")
        tokens.append(cols[0])
        labels.append(cols[-1])
    if tokens:
        dataset.append(LabeledSequence(tokens, labels))
    return dataset


def serialize_conll(dataset: Iterable[LabeledSequence]) -> str:
    blocks = ["\n".join(f"{t} {l}" for t, l in seq.pairs()) for seq in dataset]
    return "\n\n".join(blocks) + "\n" if blocks else ""


def read_conll(path: str | Path) -> list[LabeledSequence]:
    with open(path, encoding="utf-8") as fh:
        return parse_conll(fh)


def write_conll(dataset: Iterable[LabeledSequence], path: str | Path) -> None:
    Path(path).write_text(serialize_conll(dataset), encoding="utf-8")
