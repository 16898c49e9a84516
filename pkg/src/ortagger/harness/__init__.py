"""Training, evaluation, grids and the command line."""

from .config import (
    DEFAULT_SEEDS,
    DataConfig,
    ExperimentConfig,
    OptimConfig,
    apply_overrides,
    config_from_dict,
    load_config,
)
from .grid import GridSpec, load_grid, run_experiment_grid
from .metrics import EvalReport, LabelScore, evaluate_accuracy, evaluate_span_f1, evaluate_tags, extract_spans
from .model import Batch, Tagger
from .report import format_table, read_tsv, to_tsv, write_tsv
from .train import DataError, PreparedData, TrainingLog, evaluate, prepare_data, score, train

__all__ = [
    "Batch", "DEFAULT_SEEDS", "DataConfig", "DataError", "EvalReport", "ExperimentConfig",
    "GridSpec", "LabelScore", "OptimConfig", "PreparedData", "Tagger", "TrainingLog",
    "apply_overrides", "config_from_dict", "evaluate", "evaluate_accuracy", "evaluate_span_f1",
    "evaluate_tags", "extract_spans", "format_table", "load_config", "load_grid", "prepare_data",
    "read_tsv", "run_experiment_grid", "score", "to_tsv", "train", "write_tsv",
]
