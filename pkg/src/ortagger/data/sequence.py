from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class LabeledSequence:
    """Tokens paired with one label each (BIO tags or plain tags)."""

    tokens: tuple[str, ...]
    labels: tuple[str, ...]
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.tokens) != len(self.labels):
            raise ValueError(f"{len(self.tokens)} tokens but {len(self.labels)} labels")
        if not self.tokens:
            raise ValueError("a labeled sequence needs at least one token")

    def __len__(self) -> int:
        return len(self.tokens)

    def pairs(self) -> list[tuple[str, str]]:
        return list(zip(self.tokens, self.labels))


def is_bio(labels) -> bool:
    """True when every label is ``O`` or carries a ``B-``/``I-`` prefix."""
    return all(lab == "O" or lab[:2] in ("B-", "I-") for lab in labels)
