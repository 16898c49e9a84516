"""Synthetic source/target "languages" that differ only in unit order.

Sentences are instantiated from templates.  A template is a list of units;
each unit is either literal text (labelled ``O``) or a ``{slot}`` reference
filled from slot patterns, whose ``{lexicon}`` references are filled from
word lists.  A target language is a fixed permutation of each template's
units, so source and target share vocabulary and labels and entities stay
contiguous.

Spec files are YAML with the keys ``spec_version`` (must be 1), ``seed``,
``counts`` (``train``/``dev``/``test`` per language; ``target_*`` keys
override for target languages), ``lexicon``, ``slots`` and ``templates``
(each with ``name``, ``units`` and ``orders: {target_name: [unit indices]}``,
optional ``weight``).
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .sequence import LabeledSequence

SPEC_VERSION = 1
SPLITS = ("train", "dev", "test")
_REF = re.compile(r"\{(\w+)\}")
MAX_ATTEMPTS = 2000


class SynthError(ValueError):
    pass


@dataclass
class Template:
    name: str
    units: list[str]
    orders: dict[str, list[int]] = field(default_factory=dict)
    weight: float = 1.0


@dataclass
class SynthSpec:
    templates: list[Template]
    slots: dict[str, list[str]]
    lexicon: dict[str, list[str]] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=lambda: {"train": 600, "dev": 200, "test": 400})
    seed: int = 0
    spec_version: int = SPEC_VERSION

    @property
    def targets(self) -> list[str]:
        names: list[str] = []
        for t in self.templates:
            for k in t.orders:
                if k not in names:
                    names.append(k)
        return names

    def count(self, split: str, target: bool) -> int:
        if target and f"target_{split}" in self.counts:
            return int(self.counts[f"target_{split}"])
        return int(self.counts.get(split, 0))

    def validate(self) -> None:
        if self.spec_version != SPEC_VERSION:
            raise SynthError(f"unsupported spec_version {self.spec_version}; expected {SPEC_VERSION}")
        if not self.templates or not self.slots:
            raise SynthError("spec needs at least one template and one slot type")
        targets = self.targets
        for t in self.templates:
            if not t.units:
                raise SynthError(f"template {t.name!r} has no units")
            for unit in t.units:
                m = re.fullmatch(r"\{(\w+)\}", unit.strip())
                if m and m.group(1) not in self.slots:
                    raise SynthError(f"template {t.name!r} references unknown slot type {m.group(1)!r}")
            for tgt in targets:
                order = t.orders.get(tgt, list(range(len(t.units))))
                if sorted(order) != list(range(len(t.units))):
                    raise SynthError(f"template {t.name!r}: order for {tgt!r} is not a permutation "
                                     f"of its {len(t.units)} units")
        for slot, patterns in self.slots.items():
            if not patterns:
                raise SynthError(f"slot type {slot!r} has no fillers")
            for p in patterns:
                for ref in _REF.findall(p):
                    if ref not in self.lexicon or not self.lexicon[ref]:
                        raise SynthError(f"slot {slot!r} pattern {p!r} references unknown lexicon {ref!r}")

    def with_identity_targets(self, name: str = "identity") -> "SynthSpec":
        """Copy of this spec whose only target language keeps source order."""
        spec = copy.deepcopy(self)
        for t in spec.templates:
            t.orders = {name: list(range(len(t.units)))}
        return spec

    def to_dict(self) -> dict:
        return {
            "spec_version": self.spec_version,
            "seed": self.seed,
            "counts": dict(self.counts),
            "lexicon": self.lexicon,
            "slots": self.slots,
            "templates": [{"name": t.name, "units": t.units, "orders": t.orders, "weight": t.weight}
                          for t in self.templates],
        }


def synth_spec_from_dict(raw: dict) -> SynthSpec:
    if not isinstance(raw, dict):
        raise SynthError("synthetic spec must be a mapping")
    try:
        templates = [Template(name=str(t["name"]), units=[str(u) for u in t["units"]],
                              orders={str(k): [int(i) for i in v] for k, v in (t.get("orders") or {}).items()},
                              weight=float(t.get("weight", 1.0)))
                     for t in raw["templates"]]
        spec = SynthSpec(templates=templates,
                         slots={str(k): [str(p) for p in v] for k, v in raw["slots"].items()},
                         lexicon={str(k): [str(w) for w in v] for k, v in (raw.get("lexicon") or {}).items()},
                         counts={str(k): int(v) for k, v in (raw.get("counts") or {}).items()} or
                         SynthSpec.__dataclass_fields__["counts"].default_factory(),
                         seed=int(raw.get("seed", 0)),
                         spec_version=int(raw.get("spec_version", -1)))
    except (KeyError, TypeError) as exc:
        raise SynthError(f"malformed synthetic spec: missing or invalid {exc}") from None
    spec.validate()
    return spec


def load_synth_spec(path: str | Path | None = None) -> SynthSpec:
    """Load a YAML spec; ``None`` gives the packaged default."""
    if path is None:
        text = resources.files("ortagger.data").joinpath("default_synth.yaml").read_text()
    else:
        text = Path(path).read_text()
    return synth_spec_from_dict(yaml.safe_load(text))


def default_synth_spec() -> SynthSpec:
    return load_synth_spec(None)


@dataclass
class Splits:
    train: list[LabeledSequence]
    dev: list[LabeledSequence]
    test: list[LabeledSequence]

    def __getitem__(self, split: str) -> list[LabeledSequence]:
        return getattr(self, split)


def _fill(pattern: str, lexicon: dict[str, list[str]], rng: np.random.Generator) -> list[str]:
    text = _REF.sub(lambda m: lexicon[m.group(1)][rng.integers(len(lexicon[m.group(1)]))], pattern)
    return text.split()


def _instantiate(template: Template, spec: SynthSpec, rng: np.random.Generator):
    units = []
    for unit in template.units:
        m = re.fullmatch(r"\{(\w+)\}", unit.strip())
        if m:
            slot = m.group(1)
            patterns = spec.slots[slot]
            words = _fill(patterns[rng.integers(len(patterns))], spec.lexicon, rng)
            labels = [f"B-{slot}"] + [f"I-{slot}"] * (len(words) - 1)
        else:
            words = unit.split()
            labels = ["O"] * len(words)
        units.append((tuple(words), tuple(labels)))
    return units


def _assemble(units, order) -> tuple[list[str], list[str]]:
    tokens: list[str] = []
    labels: list[str] = []
    for i in order:
        tokens.extend(units[i][0])
        labels.extend(units[i][1])
    return tokens, labels


def synth_corpus(spec: SynthSpec) -> tuple[Splits, dict[str, Splits]]:
    """Generate source splits and one set of splits per target language.

    Every instantiation (template plus fillers) is used at most once across
    all splits and languages, so splits are disjoint by construction.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    weights = np.array([t.weight for t in spec.templates], dtype=np.float64)
    weights /= weights.sum()
    used: set = set()

    def draw(n: int, language: str | None) -> list[LabeledSequence]:
        out = []
        for _ in range(n):
            for _attempt in range(MAX_ATTEMPTS):
                t_idx = int(rng.choice(len(spec.templates), p=weights))
                template = spec.templates[t_idx]
                units = _instantiate(template, spec, rng)
                key = (template.name, tuple(u[0] for u in units))
                if key not in used:
                    used.add(key)
                    break
            else:
                raise SynthError("could not draw a fresh sentence; the template space is too small "
                                 "for the requested counts")
            order = list(range(len(units))) if language is None else \
                template.orders.get(language, list(range(len(units))))
            tokens, labels = _assemble(units, order)
            out.append(LabeledSequence(tokens, labels,
                                       meta={"template": template.name, "language": language or "source"}))
        return out

    source = Splits(*(draw(spec.count(s, False), None) for s in SPLITS))
    targets = {name: Splits(*(draw(spec.count(s, True), name) for s in SPLITS)) for name in spec.targets}
    return source, targets
