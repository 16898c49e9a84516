"""BiLSTM, transformer (TRS), relative-position transformer (RPT) and order-reduced transformer (ORT)."""

from .attention import MultiHeadAttention, RelativeMultiHeadAttention, relative_index
from .conv import Conv1d
from .encoder import (
    FAMILIES,
    FF_MODES,
    PE_MODES,
    ConfigError,
    Encoder,
    EncoderConfig,
    FeedForward,
    SequenceFeatures,
    TransformerLayer,
    encode,
)
from .layers import (
    LayerNorm,
    Linear,
    Module,
    PositionalEmbeddings,
    PositionError,
    external_pe,
    learned_pe,
    sinusoid_table,
    sinusoidal_pe,
)
from .lstm import LSTM, BiLSTM, reverse_index

__all__ = [
    "BiLSTM", "ConfigError", "Conv1d", "Encoder", "EncoderConfig", "FAMILIES", "FF_MODES",
    "FeedForward", "LSTM", "LayerNorm", "Linear", "Module", "MultiHeadAttention", "PE_MODES",
    "PositionError", "PositionalEmbeddings", "RelativeMultiHeadAttention", "SequenceFeatures",
    "TransformerLayer", "encode", "external_pe", "learned_pe", "relative_index",
    "reverse_index", "sinusoid_table", "sinusoidal_pe",
]
