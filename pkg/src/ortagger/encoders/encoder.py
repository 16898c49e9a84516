"""Encoder configuration and the four encoder families behind one interface."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ..autodiff import Parameter, Tensor, no_grad, ops
from .attention import MultiHeadAttention, RelativeMultiHeadAttention
from .conv import Conv1d
from .layers import (
    LayerNorm,
    Linear,
    Module,
    PositionalEmbeddings,
    PositionError,
    external_pe,
    learned_pe,
    sinusoidal_pe,
)
from .lstm import BiLSTM

FAMILIES = ("bilstm", "trs", "rpt", "ort")
PE_MODES = ("sinusoid", "learned", "frozen_external", "none")
FF_MODES = ("linear", "conv1d")

DEFAULT_PE = {"trs": "sinusoid", "rpt": "none", "ort": "none", "bilstm": "none"}


class ConfigError(ValueError):
    pass


@dataclass
class EncoderConfig:
    family: str = "ort"
    d_model: int = 64
    num_heads: int = 4
    num_layers: int = 2
    pe_mode: Optional[str] = None  # None -> family default
    ff_mode: str = "conv1d"
    kernel_size: int = 3
    conv_channels: Optional[int] = None  # None -> d_model
    rpt_clip_distance: int = 8
    dropout: float = 0.1
    max_positions: int = 512

    def __post_init__(self):
        if self.pe_mode is None:
            self.pe_mode = DEFAULT_PE.get(self.family, "none")
        if self.conv_channels is None:
            self.conv_channels = self.d_model
        self.validate()

    def validate(self) -> None:
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown encoder family {self.family!r}; expected one of {FAMILIES}")
        if self.pe_mode not in PE_MODES:
            raise ConfigError(f"unknown pe_mode {self.pe_mode!r}; expected one of {PE_MODES}")
        if self.ff_mode not in FF_MODES:
            raise ConfigError(f"unknown ff_mode {self.ff_mode!r}; expected one of {FF_MODES}")
        if self.family == "ort" and self.pe_mode != "none":
            raise ConfigError("the order-reduced transformer takes no positional embeddings (pe_mode=none)")
        if self.family == "bilstm" and self.pe_mode != "none":
            raise ConfigError("bilstm does not use positional embeddings")
        for name in ("d_model", "num_heads", "num_layers", "conv_channels",
                     "rpt_clip_distance", "max_positions"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.d_model % self.num_heads:
            raise ConfigError(f"d_model={self.d_model} not divisible by num_heads={self.num_heads}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError(f"kernel_size must be odd and positive, got {self.kernel_size}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.pe_mode == "sinusoid" and self.d_model % 2:
            raise ConfigError("sinusoidal embeddings need an even d_model")
        if self.family == "bilstm" and self.d_model % 2:
            raise ConfigError("bilstm needs an even d_model")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SequenceFeatures:
    features: np.ndarray  # (n, d_model)

    @property
    def length(self) -> int:
        return self.features.shape[0]


class FeedForward(Module):
    """Position-wise MLP, or the same MLP with a convolution as its first layer."""

    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator):
        self.mode = cfg.ff_mode
        if cfg.ff_mode == "conv1d":
            self.inner = Conv1d(cfg.d_model, cfg.conv_channels, cfg.kernel_size, rng)
        else:
            self.inner = Linear(cfg.d_model, cfg.conv_channels, rng)
        self.outer = Linear(cfg.conv_channels, cfg.d_model, rng)

    def __call__(self, x: Tensor, mask: np.ndarray | None) -> Tensor:
        h = self.inner(x, mask) if self.mode == "conv1d" else self.inner(x)
        return self.outer(ops.relu(h))


class TransformerLayer(Module):
    """Pre-norm block: ``x + attn(LN(x))`` then ``x + ff(LN(x))``."""

    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator):
        if cfg.family == "rpt":
            self.attn = RelativeMultiHeadAttention(cfg.d_model, cfg.num_heads, cfg.rpt_clip_distance, rng)
        else:
            self.attn = MultiHeadAttention(cfg.d_model, cfg.num_heads, rng)
        self.norm1 = LayerNorm(cfg.d_model)
        self.ff = FeedForward(cfg, rng)
        self.norm2 = LayerNorm(cfg.d_model)
        self.dropout = cfg.dropout

    def __call__(self, x: Tensor, mask, training: bool, rng) -> Tensor:
        a = self.attn(self.norm1(x), mask)
        x = x + ops.dropout(a, self.dropout, rng, training)
        f = self.ff(self.norm2(x), mask)
        return x + ops.dropout(f, self.dropout, rng, training)


class Encoder(Module):
    """Maps embedded tokens ``(B, n, d_embed)`` to features ``(B, n, d_model)``."""

    def __init__(self, cfg: EncoderConfig, d_embed: int, rng: np.random.Generator,
                 external_matrix: np.ndarray | None = None):
        cfg.validate()
        self.cfg = cfg
        self.d_embed = d_embed
        self.pe: PositionalEmbeddings | None = None
        if cfg.family == "bilstm":
            self.layers = [BiLSTM(d_embed if i == 0 else cfg.d_model, cfg.d_model, rng)
                           for i in range(cfg.num_layers)]
            self.proj = None
            self.final_norm = None
        else:
            self.proj = Linear(d_embed, cfg.d_model, rng) if d_embed != cfg.d_model else None
            self.layers = [TransformerLayer(cfg, rng) for _ in range(cfg.num_layers)]
            self.final_norm = LayerNorm(cfg.d_model)
            if cfg.pe_mode == "sinusoid":
                self.pe = sinusoidal_pe(cfg.max_positions, cfg.d_model)
            elif cfg.pe_mode == "learned":
                self.pe = learned_pe(cfg.max_positions, cfg.d_model, rng)
        if external_matrix is not None:
            self.load_frozen_pe(external_matrix)

    def load_frozen_pe(self, matrix: np.ndarray) -> None:
        """Install an externally supplied ``(p, d_model)`` matrix as frozen positional embeddings."""
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] < 1:
            raise ConfigError(f"positional matrix must be (p, d) with p >= 1, got {matrix.shape}")
        if matrix.shape[1] != self.cfg.d_model:
            raise ConfigError(f"positional matrix width {matrix.shape[1]} != d_model {self.cfg.d_model}")
        if self.cfg.family in ("ort", "bilstm"):
            raise ConfigError(f"family {self.cfg.family} does not take positional embeddings")
        self.pe = external_pe(matrix)
        self.cfg.pe_mode = "frozen_external"
        self.cfg.max_positions = matrix.shape[0]

    def __call__(self, x: Tensor, mask: np.ndarray | None = None, training: bool = False,
                 rng: np.random.Generator | None = None) -> Tensor:
        cfg = self.cfg
        n = x.shape[1]
        if cfg.family == "bilstm":
            for i, layer in enumerate(self.layers):
                if i:
                    x = ops.dropout(x, cfg.dropout, rng, training)
                x = layer(x, mask)
            return x
        if self.proj is not None:
            x = self.proj(x)
        if cfg.pe_mode != "none":
            if self.pe is None:
                raise ConfigError("pe_mode=frozen_external but no positional matrix was loaded")
            if n > self.pe.max_positions:
                raise PositionError(f"sequence of length {n} exceeds {self.pe.max_positions} positions")
            x = x + self.pe.lookup(n)
        for layer in self.layers:
            x = layer(x, mask, training, rng)
        return self.final_norm(x)


def encode(token_ids, embeddings, encoder: Encoder) -> SequenceFeatures:
    """Encode one sequence of vocabulary ids in inference mode."""
    ids = np.asarray(token_ids, dtype=np.int64)
    table = embeddings.data if isinstance(embeddings, Parameter) else np.asarray(embeddings)
    with no_grad():
        x = Tensor(table[ids][None])
        out = encoder(x, np.ones((1, len(ids)), dtype=bool))
    return SequenceFeatures(out.data[0])
