import numpy as np
import pytest

from oracles import crf_brute_force
from ortagger.autodiff import no_grad
from ortagger.data import LabeledSequence
from ortagger.encoders import ConfigError
from ortagger.harness import (
    Tagger,
    apply_overrides,
    config_from_dict,
    evaluate,
    load_config,
    prepare_data,
    train,
)
from ortagger.harness.grid import GridSpec, aggregate, expand_cells, load_grid, run_experiment_grid
from ortagger.harness.report import format_table, read_tsv, write_tsv
from ortagger.harness.train import fewshot_mix, training_set


def _cfg(raw, **overrides):
    return config_from_dict(apply_overrides(raw, overrides))


# --- configuration ---------------------------------------------------------

def test_default_config_values():
    cfg = config_from_dict({})
    assert cfg.encoder.family == "ort" and cfg.encoder.d_model == 64 and cfg.head == "crf"
    assert cfg.data.synth == "default" and cfg.shuffle is None


def test_overrides_and_unknown_keys(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("encoder: {family: trs}\nshuffle: {k: 2, copies: 3}\n")
    cfg = load_config(path, ["encoder.d_model=16", "optim.lr=0.5", "shuffle.k=inf"])
    assert cfg.encoder.family == "trs" and cfg.encoder.d_model == 16 and cfg.optim.lr == 0.5
    assert cfg.shuffle.k == float("inf") and cfg.shuffle.copies == 3
    with pytest.raises(ConfigError):
        load_config(path, ["encoder.colour=red"])
    with pytest.raises(ConfigError):
        load_config(path, ["head=softmax"])
    with pytest.raises(ConfigError):
        load_config(path, ["spec_version=9"])
    with pytest.raises(ConfigError):
        load_config(path, ["encoder.family=ort", "encoder.pe_mode=learned"])


def test_resolved_config_round_trip():
    cfg = config_from_dict({"shuffle": {"k": "inf"}, "noisy_k": [1, "inf"]})
    import yaml
    again = config_from_dict(yaml.safe_load(cfg.to_yaml()))
    assert again.to_dict() == cfg.to_dict()
    assert again.fingerprint() == cfg.fingerprint()
    assert config_from_dict({"seed": 1}).fingerprint() != config_from_dict({"seed": 2}).fingerprint()


# --- training ----------------------------------------------------------------

def test_overfit_toy_set(tiny_raw):
    cfg = _cfg(tiny_raw, **{"optim.max_steps": 100, "optim.epochs": 100, "optim.batch_size": 20,
                            "optim.patience": 100})
    data = prepare_data(cfg)
    data.train = data.train[:20]
    data.dev = data.train
    model, log = train(cfg, data)
    with no_grad():
        final = model.loss(model.make_batch(data.train), training=False).item()
    assert log.steps == 100
    assert final < 0.25 * log.initial_loss


def test_frozen_tensors_unchanged(tiny_raw, tmp_path):
    pe = np.random.default_rng(0).normal(size=(32, 8))
    np.save(tmp_path / "pe.npy", pe)
    raw = apply_overrides(tiny_raw, {"encoder.family": "trs", "encoder.pe_mode": "frozen_external",
                                     "data.external_pe": str(tmp_path / "pe.npy")})
    cfg = config_from_dict(raw)
    data = prepare_data(cfg)
    emb_before = data.embeddings.matrix.copy()
    model, _ = train(cfg, data)
    assert np.array_equal(model.encoder.pe.matrix.data, pe)
    assert np.array_equal(model.embed.data, emb_before)


def test_same_seed_same_trajectory(tiny_raw):
    cfg = _cfg(tiny_raw, **{"encoder.dropout": 0.1})
    a = [(e.train_loss, e.dev_score) for e in train(cfg)[1].epochs]
    b = [(e.train_loss, e.dev_score) for e in train(cfg)[1].epochs]
    assert a == b
    _, la = train(cfg)
    _, lb = train(_cfg(tiny_raw, seed=99))
    assert la.initial_loss != lb.initial_loss


def test_fewshot_zero_reproduces_zero_shot(tiny_raw):
    base = _cfg(tiny_raw)
    zero = _cfg(tiny_raw, fewshot_target_fraction=0.0, name="x")
    ma, _ = train(base)
    mb, _ = train(zero)
    for name, p in ma.named_parameters():
        assert np.array_equal(p.data, dict(mb.named_parameters())[name].data)


def test_fewshot_mixes_fraction(tiny_raw):
    cfg = _cfg(tiny_raw, fewshot_target_fraction=0.5)
    data = prepare_data(cfg)
    mixed = training_set(cfg, data)
    assert len(mixed) == len(data.train) + 5
    assert sum(s.meta["language"] == "flipped" for s in mixed) == 5
    assert fewshot_mix(data.target_train, 0.5, 1) == fewshot_mix(data.target_train, 0.5, 1)


def test_shuffle_expansion_in_training_set(tiny_raw):
    cfg = _cfg(tiny_raw, shuffle={"k": 2, "copies": 2})
    data = prepare_data(cfg)
    assert len(training_set(cfg, data)) == 3 * len(data.train)


def test_evaluate_reports(tiny_raw):
    cfg = _cfg(tiny_raw)
    data = prepare_data(cfg)
    model, _ = train(cfg, data)
    reports = evaluate(model, cfg, data)
    assert set(reports) == {"dev", "test", "noisy_k1", "target:flipped"}
    assert all(r.fingerprint == cfg.fingerprint() for r in reports.values())


# --- prediction and persistence ---------------------------------------------

def _small_model(tiny_raw, head="crf"):
    cfg = _cfg(tiny_raw, head=head)
    data = prepare_data(cfg)
    return train(cfg, data)[0], data


def test_predict_deterministic_and_length_preserving(tiny_raw):
    model, data = _small_model(tiny_raw)
    a, b = model.predict(data.test), model.predict(data.test)
    assert a == b
    assert [len(p) for p in a] == [len(s) for s in data.test]


def test_crf_predictions_match_enumeration(tiny_raw):
    model, data = _small_model(tiny_raw)
    short = [s for s in data.test if len(s) <= 5][:5]
    assert short
    p = model.crf.params()
    for seq in short:
        with no_grad():
            em = model.emissions(model.make_batch([seq])).data[0]
        _, best, _, _ = crf_brute_force(em, p.transitions, p.start, p.end)
        assert model.predict([seq])[0] == model.labels.decode(best)


def test_linear_head_predicts_argmax(tiny_raw):
    model, data = _small_model(tiny_raw, head="linear")
    seq = data.test[0]
    with no_grad():
        em = model.emissions(model.make_batch([seq])).data[0]
    assert model.predict([seq])[0] == model.labels.decode(em.argmax(axis=1))


def test_save_load_round_trip(tiny_raw, tmp_path):
    model, data = _small_model(tiny_raw)
    model.save(tmp_path / "m")
    again = Tagger.load(tmp_path / "m")
    assert again.predict(data.test) == model.predict(data.test)
    unseen = LabeledSequence(["wake", "me", "zzz"], ["O", "O", "O"])
    assert len(again.predict([unseen])[0]) == 3


# --- grids and reports -------------------------------------------------------

def test_grid_two_by_two(tiny_raw):
    base = apply_overrides(tiny_raw, {"encoder.family": "trs", "optim.epochs": 1})
    grid = GridSpec(base, expand_cells({"encoder.pe_mode": ["sinusoid", "learned"],
                                        "encoder.ff_mode": ["linear", "conv1d"]}, None), [13])
    rows, summary = run_experiment_grid(grid)
    assert len(rows) == 4 and len(summary) == 4
    assert {r["cell"] for r in rows} == {c.name for c in grid.cells}
    assert all("target:flipped_f1" in r and "noisy_k1_f1" in r for r in rows)
    rows_again, _ = run_experiment_grid(grid)
    strip = lambda rs: [{k: v for k, v in r.items() if k != "seconds"} for r in rs]
    assert strip(rows) == strip(rows_again)


def test_kernel_sweep_gives_one_curve_per_family(tiny_raw):
    cells = expand_cells({"encoder.family": ["ort", "rpt"], "encoder.kernel_size": [1, 3, 5, 7, 9]}, None)
    assert len(cells) == 10
    curves = {}
    for c in cells:
        curves.setdefault(c.overrides["encoder.family"], []).append(c.overrides["encoder.kernel_size"])
    assert curves == {"ort": [1, 3, 5, 7, 9], "rpt": [1, 3, 5, 7, 9]}


def test_grid_validates_every_cell_before_running(tiny_raw, tmp_path):
    path = tmp_path / "g.yaml"
    import yaml
    path.write_text(yaml.safe_dump({"base": tiny_raw, "seeds": [1],
                                    "cells": [{"name": "ok", "set": {}},
                                              {"name": "bad", "set": {"encoder.kernel_size": 4}}]}))
    grid = load_grid(path)
    with pytest.raises(ConfigError, match="bad"):
        run_experiment_grid(grid)


def test_aggregate_means():
    rows = [{"cell": "a", "seed": 1, "x_f1": 0.5}, {"cell": "a", "seed": 2, "x_f1": 1.0},
            {"cell": "b", "seed": 1, "x_f1": 0.0}]
    agg = aggregate(rows)
    assert agg[0]["x_f1"] == 0.75 and agg[0]["runs"] == 2 and agg[1]["x_f1"] == 0.0


def test_tsv_and_text_tables(tmp_path):
    rows = [{"cell": "ort", "f1": 0.5}, {"cell": "transformer", "f1": 0.25, "extra": 3}]
    path = write_tsv(rows, tmp_path / "t.tsv")
    back = read_tsv(path)
    assert back[1] == {"cell": "transformer", "f1": "0.2500", "extra": "3"}
    text = format_table(rows).splitlines()
    assert len({len(line.rstrip()) for line in text[:2]}) == 1
    assert text[0].split() == ["cell", "f1", "extra"]


@pytest.mark.slow
def test_identity_target_scores_like_source(tmp_path):
    from ortagger.data import default_synth_spec
    import yaml

    path = tmp_path / "identity.yaml"
    path.write_text(yaml.safe_dump(default_synth_spec().with_identity_targets("same").to_dict()))
    gaps = []
    for seed in (13, 42, 2021):
        cfg = config_from_dict({"seed": seed, "data": {"synth": str(path)},
                                "encoder": {"d_model": 16, "num_heads": 2, "num_layers": 1},
                                "optim": {"epochs": 8, "lr": 0.01}})
        data = prepare_data(cfg)
        model, _ = train(cfg, data)
        rep = evaluate(model, cfg, data)
        assert rep["dev"].f1 > 0.9
        gaps.append(rep["target:same"].f1 - rep["dev"].f1)
    assert abs(np.mean(gaps)) < 0.03


def test_shipped_configs_validate():
    from pathlib import Path

    from ortagger.harness.grid import cell_configs

    root = Path(__file__).parent.parent / "configs"
    sizes = {g: len(cell_configs(load_grid(root / f"{g}.yaml")))
             for g in ("transfer_grid", "ablation_grid", "kernel_sweep")}
    assert sizes == {"transfer_grid": 15, "ablation_grid": 36, "kernel_sweep": 30}
    assert load_config(root / "ort_synth.yaml").encoder.kernel_size == 3
    assert load_config(root / "conll_example.yaml").data.embeddings == "data/vectors.txt"
