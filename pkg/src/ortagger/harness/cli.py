"""Command line entry point.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from ..augment import ShuffleSpec, expand_training_set, make_noisy_testset, parse_k
from ..autodiff import NumericError
from ..data import (
    ConllError,
    EmbeddingError,
    LabeledSequence,
    SynthError,
    load_synth_spec,
    read_conll,
    synth_corpus,
    write_conll,
)
from ..encoders import ConfigError, PositionError
from .config import load_config
from .grid import load_grid, run_experiment_grid
from .model import Tagger
from .report import format_table, per_label_rows, report_rows, write_tsv
from .train import DataError, evaluate, prepare_data, save_run, score, train

log = logging.getLogger("ortagger")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment config (YAML)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key, e.g. encoder.family=trs (repeatable)")
    p.add_argument("--seed", type=int, help="shorthand for --set seed=N")
    p.add_argument("--out-dir", default="runs/latest", help="output directory")


def _overrides(args) -> list[str]:
    extra = list(args.set)
    if args.seed is not None:
        extra.append(f"seed={args.seed}")
    return extra


def _read_tokens(path: str) -> list[LabeledSequence]:
    """CoNLL with or without a label column; labels are replaced by ``O``."""
    seqs, toks = [], []
    with open(path, encoding="utf-8") as fh:
        for line in list(fh) + [""]:
            parts = line.split()
            if parts and parts[0] == "-DOCSTART-":
                continue
            if parts:
                toks.append(parts[0])
            elif toks:
                seqs.append(LabeledSequence(toks, ["O"] * len(toks)))
                toks = []
    return seqs


def cmd_train(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    data = prepare_data(cfg)
    model, tlog = train(cfg, data)
    out = save_run(model, cfg, args.out_dir)
    (out / "training_log.yaml").write_text(yaml.safe_dump(tlog.to_dict(), sort_keys=False))
    reports = evaluate(model, cfg, data)
    rows = report_rows(reports)
    write_tsv(rows, out / "eval.tsv")
    (out / "eval.json").write_text(json.dumps({k: r.to_dict() for k, r in reports.items()}, indent=2))
    print(format_table(rows, ["dataset", "sentences", "precision", "recall", "f1", "accuracy"]))
    print(f"best epoch {tlog.best_epoch} ({tlog.stopped}); model saved to {out / 'model'}")
    return EXIT_OK


def _load_model(args) -> tuple[Tagger, dict]:
    run = Path(args.model)
    model_dir = run / "model" if (run / "model").is_dir() else run
    if not (model_dir / "model.yaml").exists():
        raise DataError(f"{args.model} is not a saved model directory")
    cfg_path = model_dir.parent / "config.yaml"
    meta = yaml.safe_load(cfg_path.read_text()) if cfg_path.exists() else {}
    return Tagger.load(model_dir), meta


def cmd_eval(args) -> int:
    model, meta = _load_model(args)
    task = args.task or ("bio" if model.labels.itos and all(
        l == "O" or l[:2] in ("B-", "I-") for l in model.labels.itos) else "tags")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = {}
    for path in args.input:
        data = read_conll(path)
        if not data:
            raise DataError(f"{path} contains no sentences")
        unknown = {l for s in data for l in s.labels} - set(model.labels.stoi)
        if unknown:
            log.warning("%s: labels unseen in training: %s", path, sorted(unknown))
        reports[path] = score(model, data, task, dataset=Path(path).name,
                              seed=meta.get("seed"), fingerprint=_fingerprint(meta))
    rows = report_rows(reports)
    write_tsv(rows, out / "eval.tsv")
    for path, rep in reports.items():
        write_tsv(per_label_rows(rep), out / f"{Path(path).stem}.per_label.tsv")
    (out / "eval.json").write_text(json.dumps({k: r.to_dict() for k, r in reports.items()}, indent=2))
    print(format_table(rows, ["dataset", "sentences", "tokens", "precision", "recall", "f1", "accuracy"]))
    return EXIT_OK


def _fingerprint(meta: dict) -> str:
    if not meta:
        return ""
    from .config import config_from_dict
    try:
        return config_from_dict(meta).fingerprint()
    except ConfigError:
        return ""


def cmd_predict(args) -> int:
    model, _ = _load_model(args)
    seqs = _read_tokens(args.input)
    preds = model.predict(seqs)
    out = [LabeledSequence(s.tokens, p) for s, p in zip(seqs, preds)]
    if args.output:
        write_conll(out, args.output)
    else:
        from ..data import serialize_conll
        sys.stdout.write(serialize_conll(out))
    return EXIT_OK


def cmd_augment(args) -> int:
    data = read_conll(args.input)
    if args.noisy:
        out = make_noisy_testset(data, parse_k(args.k), seed=args.seed or 0)
    else:
        spec = ShuffleSpec(k=args.k, copies=args.copies, preserve_entities=not args.no_entities,
                           seed=args.seed or 0)
        out = expand_training_set(data, spec)
    write_conll(out, args.output)
    print(f"wrote {len(out)} sentences to {args.output}")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = load_synth_spec(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    source, targets = synth_corpus(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for split in ("train", "dev", "test"):
        write_conll(source[split], out / f"source.{split}.conll")
        for name, splits in targets.items():
            write_conll(splits[split], out / f"{name}.{split}.conll")
    print(f"wrote source and {len(targets)} target language(s) to {out}")
    return EXIT_OK


def cmd_grid(args) -> int:
    grid = load_grid(args.grid, _overrides(args))
    rows, summary = run_experiment_grid(grid, args.jobs)
    out = Path(args.out_dir)
    write_tsv(rows, out / "runs.tsv")
    write_tsv(summary, out / "summary.tsv")
    cols = [c for c in summary[0] if c == "cell" or (c.endswith("_f1") and "std" not in c)]
    print(format_table(summary, cols))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ortagger", description="Order-robust sequence tagging experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a tagger and evaluate it")
    _common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a saved model on CoNLL files")
    _common(p)
    p.add_argument("--model", required=True, help="run directory or model directory")
    p.add_argument("--task", choices=("bio", "tags"))
    p.add_argument("input", nargs="+", help="CoNLL files with gold labels")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="tag a file with a saved model")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--output", help="output CoNLL file (default: stdout)")
    p.add_argument("input")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("augment", help="write shuffled copies or a noisy test set")
    _common(p)
    p.add_argument("--k", default="inf", help="shuffle degree (integer or inf)")
    p.add_argument("--copies", type=int, default=10)
    p.add_argument("--no-entities", action="store_true", help="shuffle tokens, ignoring entity spans")
    p.add_argument("--noisy", action="store_true", help="replace each sentence by one shuffle (test set)")
    p.add_argument("--output", required=True)
    p.add_argument("input")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("synth", help="write the synthetic corpus as CoNLL files")
    _common(p)
    p.add_argument("--spec", help="synthetic spec YAML (default: packaged spec)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("grid", help="run an experiment grid")
    _common(p)
    p.add_argument("--grid", required=True, help="grid YAML")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_grid)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ConllError, EmbeddingError, SynthError, PositionError, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
