"""Experiment configuration files.

Configs are YAML mappings with ``spec_version: 1``.  Top-level keys::

    name, seed, head (crf | linear), bio_mask, fewshot_target_fraction, noisy_k
    encoder:  EncoderConfig fields (family, d_model, num_heads, ...)
    shuffle:  null, or {k, copies, preserve_entities, seed}
    optim:    {lr, batch_size, epochs, clip, patience, max_steps}
    data:     either {synth: default | <spec.yaml>, target: <name>}
              or {train, dev, test, targets: {name: path}, target_train: {name: path}}
              plus optional embeddings, embed_dim, external_pe, task (bio | tags)

Any key can be overridden with ``key.sub=value`` strings; values are parsed as YAML.
"""

from __future__ import annotations

import copy
import hashlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

import yaml

from ..augment import ShuffleSpec
from ..encoders import ConfigError, EncoderConfig

SPEC_VERSION = 1
HEADS = ("crf", "linear")
DEFAULT_SEEDS = (13, 42, 2021)


@dataclass
class OptimConfig:
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 30
    clip: float = 5.0
    patience: int = 5
    max_steps: Optional[int] = None

    def validate(self) -> None:
        if self.lr <= 0:
            raise ConfigError("optim.lr must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("optim.batch_size and optim.epochs must be >= 1")
        if self.patience < 1:
            raise ConfigError("optim.patience must be >= 1")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError("optim.max_steps must be >= 1 when set")


@dataclass
class DataConfig:
    synth: Optional[str] = None  # "default" or a spec path
    target: Optional[str] = None  # which synthetic target language to report as "target"
    train: Optional[str] = None
    dev: Optional[str] = None
    test: Optional[str] = None
    targets: dict = field(default_factory=dict)
    target_train: dict = field(default_factory=dict)
    embeddings: Optional[str] = None
    embed_dim: Optional[int] = None  # random embeddings width when no file is given
    embed_seed: int = 0
    external_pe: Optional[str] = None
    task: Optional[str] = None  # bio | tags; inferred from labels when unset

    def validate(self) -> None:
        if self.synth is None and self.train is None:
            raise ConfigError("data needs either 'synth' or a 'train' file")
        if self.synth is not None and self.train is not None:
            raise ConfigError("data.synth and data.train are mutually exclusive")
        if self.train is not None and self.dev is None:
            raise ConfigError("data.dev is required for model selection")
        if self.task not in (None, "bio", "tags"):
            raise ConfigError(f"data.task must be 'bio' or 'tags', got {self.task!r}")


@dataclass
class ExperimentConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    head: str = "crf"
    shuffle: Optional[ShuffleSpec] = None
    optim: OptimConfig = field(default_factory=OptimConfig)
    data: DataConfig = field(default_factory=lambda: DataConfig(synth="default"))
    seed: int = 13
    name: str = ""
    fewshot_target_fraction: float = 0.0
    noisy_k: list = field(default_factory=list)
    bio_mask: bool = False
    spec_version: int = SPEC_VERSION

    def validate(self) -> None:
        if self.spec_version != SPEC_VERSION:
            raise ConfigError(f"unsupported spec_version {self.spec_version}; expected {SPEC_VERSION}")
        self.encoder.validate()
        self.optim.validate()
        self.data.validate()
        if self.head not in HEADS:
            raise ConfigError(f"head must be one of {HEADS}, got {self.head!r}")
        if not 0.0 <= self.fewshot_target_fraction <= 1.0:
            raise ConfigError("fewshot_target_fraction must lie in [0, 1]")
        if self.fewshot_target_fraction > 0 and self.data.synth is None and not self.data.target_train:
            raise ConfigError("few-shot mixing needs target training data (data.target_train)")
        if self.encoder.pe_mode == "frozen_external" and not self.data.external_pe:
            raise ConfigError("pe_mode=frozen_external needs data.external_pe")
        for k in self.noisy_k:
            if str(k) != "inf" and int(k) < 1:
                raise ConfigError("noisy_k entries must be >= 1")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["shuffle"] = None if self.shuffle is None else self.shuffle.to_dict()
        out["noisy_k"] = [str(k) if k == float("inf") else k for k in self.noisy_k]
        return out

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_yaml().encode()).hexdigest()[:12]


def _coerce(value: Any, annotation: str, where: str) -> Any:
    # YAML reads "1e300" as a string; numeric fields accept such spellings
    if not isinstance(value, str) or value == "inf":
        return value
    for name, cast in (("float", float), ("int", int)):
        if annotation in (name, f"Optional[{name}]"):
            try:
                return cast(value)
            except ValueError:
                raise ConfigError(f"{where} must be a number, got {value!r}") from None
    return value


def _build(cls, raw: dict | None, section: str):
    raw = dict(raw or {})
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {sorted(unknown)}")
    for f in fields(cls):
        if f.name in raw:
            raw[f.name] = _coerce(raw[f.name], str(f.type), f"{section}.{f.name}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {section}: {exc}") from None


def config_from_dict(raw: dict[str, Any]) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    raw = copy.deepcopy(raw)
    raw.setdefault("spec_version", SPEC_VERSION)
    top = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - top
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")
    shuffle = raw.pop("shuffle", None)
    cfg = ExperimentConfig(
        encoder=_build(EncoderConfig, raw.pop("encoder", None), "encoder"),
        optim=_build(OptimConfig, raw.pop("optim", None), "optim"),
        data=_build(DataConfig, raw.pop("data", None) or {"synth": "default"}, "data"),
        shuffle=None if shuffle in (None, False) else _build(ShuffleSpec, shuffle, "shuffle"),
        **raw,
    )
    cfg.validate()
    return cfg


def parse_override(text: str) -> tuple[list[str], Any]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, value = text.split("=", 1)
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        parsed = yaml.safe_load(value) if value.strip() else None
    except yaml.YAMLError:
        parsed = value
    return path, parsed


def apply_overrides(raw: dict, overrides: list[str] | dict) -> dict:
    """Apply ``a.b=value`` strings (or a ``{"a.b": value}`` mapping) to a raw config dict."""
    raw = copy.deepcopy(raw)
    items = overrides.items() if isinstance(overrides, dict) else (parse_override(o) for o in overrides)
    for key, value in items:
        path = key.split(".") if isinstance(key, str) else key
        node = raw
        for part in path[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = node[part] = {}
            node = nxt
        node[path[-1]] = value
    return raw


def load_raw(path: str | Path | None) -> dict:
    if path is None:
        return {}
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return raw


def load_config(path: str | Path | None, overrides: list[str] | None = None) -> ExperimentConfig:
    return config_from_dict(apply_overrides(load_raw(path), overrides or []))
