"""Corpus ingestion, vocabularies and embeddings, and the synthetic reordered-language generator."""

from .conll import ConllError, parse_conll, read_conll, serialize_conll, write_conll
from .sequence import LabeledSequence, is_bio
from .synth import (
    Splits,
    SynthError,
    SynthSpec,
    Template,
    default_synth_spec,
    load_synth_spec,
    synth_corpus,
    synth_spec_from_dict,
)
from .vocab import (
    PAD,
    UNK,
    CoverageReport,
    EmbeddingError,
    EmbeddingMatrix,
    LabelSet,
    Vocab,
    build_vocab,
    load_embeddings,
    random_embeddings,
    write_embeddings,
)

__all__ = [
    "PAD", "UNK", "ConllError", "CoverageReport", "EmbeddingError", "EmbeddingMatrix",
    "LabelSet", "LabeledSequence", "Splits", "SynthError", "SynthSpec", "Template", "Vocab",
    "build_vocab", "default_synth_spec", "is_bio", "load_embeddings", "load_synth_spec",
    "parse_conll", "random_embeddings", "read_conll", "serialize_conll", "synth_corpus",
    "synth_spec_from_dict", "write_conll", "write_embeddings",
]
