"""Experiment grids: a base config crossed with axes and/or explicit cells, over several seeds.

Grid files are YAML::

    base: {...}            # an experiment config (or base_config: path/to/config.yaml)
    seeds: [13, 42, 2021]
    axes:                  # optional cartesian product of dotted overrides
      encoder.family: [ort, trs]
    cells:                 # optional explicit cells, combined with every axes point
      - name: ort_h9
        set: {encoder.kernel_size: 9}
    jobs: 1
"""

from __future__ import annotations

import itertools
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..encoders import ConfigError
from .config import DEFAULT_SEEDS, ExperimentConfig, apply_overrides, config_from_dict, load_raw
from .train import evaluate, prepare_data, train

log = logging.getLogger(__name__)


@dataclass
class Cell:
    name: str
    overrides: dict


@dataclass
class GridSpec:
    base: dict
    cells: list[Cell]
    seeds: list[int] = field(default_factory=lambda: list(DEFAULT_SEEDS))
    jobs: int = 1


def _label(overrides: dict) -> str:
    return ",".join(f"{k.split('.')[-1]}={v}" for k, v in overrides.items()) or "base"


def expand_cells(axes: dict | None, cells: list | None) -> list[Cell]:
    axes = axes or {}
    for key, values in axes.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"grid axis {key!r} needs a non-empty list of values")
    points = [dict(zip(axes, combo)) for combo in itertools.product(*axes.values())] or [{}]
    explicit = []
    for i, c in enumerate(cells or []):
        if not isinstance(c, dict) or not isinstance(c.get("set", {}), dict):
            raise ConfigError(f"grid cell #{i} must be a mapping with an optional 'set' mapping")
        explicit.append(Cell(str(c.get("name") or _label(c.get("set", {}))), dict(c.get("set", {}))))
    if not explicit:
        return [Cell(_label(p), p) for p in points]
    out = []
    for p in points:
        for c in explicit:
            name = c.name if not p else f"{_label(p)}/{c.name}"
            out.append(Cell(name, {**p, **c.overrides}))
    return out


def load_grid(path: str | Path, overrides: list[str] | None = None) -> GridSpec:
    raw = load_raw(path)
    unknown = set(raw) - {"base", "base_config", "seeds", "axes", "cells", "jobs"}
    if unknown:
        raise ConfigError(f"unknown grid key(s): {sorted(unknown)}")
    base = dict(raw.get("base") or {})
    if raw.get("base_config"):
        base = {**load_raw(Path(path).parent / raw["base_config"]), **base}
    base = apply_overrides(base, overrides or [])
    seeds = [int(s) for s in raw.get("seeds") or DEFAULT_SEEDS]
    return GridSpec(base, expand_cells(raw.get("axes"), raw.get("cells")), seeds, int(raw.get("jobs", 1)))


def cell_configs(grid: GridSpec) -> list[tuple[Cell, ExperimentConfig]]:
    """Validate every (cell, seed) configuration up front so a typo fails before any training."""
    out = []
    for cell in grid.cells:
        for seed in grid.seeds:
            raw = apply_overrides(grid.base, {**cell.overrides, "seed": seed})
            try:
                cfg = config_from_dict(raw)
            except ConfigError as exc:
                raise ConfigError(f"grid cell {cell.name!r} (seed {seed}): {exc}") from None
            if not cfg.name:
                cfg.name = cell.name
            out.append((cell, cfg))
    return out


def run_cell(cell_name: str, cfg: ExperimentConfig) -> dict:
    t0 = time.perf_counter()
    data = prepare_data(cfg)
    model, tlog = train(cfg, data)
    row = {"cell": cell_name, "seed": cfg.seed, "fingerprint": cfg.fingerprint()}
    for name, rep in evaluate(model, cfg, data).items():
        row[f"{name}_f1"] = rep.f1
        row[f"{name}_acc"] = rep.accuracy
    row.update(best_epoch=tlog.best_epoch, steps=tlog.steps, seconds=time.perf_counter() - t0)
    return row


def _run(args):
    return run_cell(*args)


def run_experiment_grid(grid: GridSpec, jobs: int | None = None) -> tuple[list[dict], list[dict]]:
    """Run every cell and seed; returns (per-run rows, per-cell mean rows)."""
    runs = cell_configs(grid)
    jobs = jobs or grid.jobs
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run, [(c.name, cfg) for c, cfg in runs]))
    else:
        rows = []
        for cell, cfg in runs:
            log.info("running %s seed %d", cell.name, cfg.seed)
            rows.append(run_cell(cell.name, cfg))
    return rows, aggregate(rows)


def aggregate(rows: list[dict]) -> list[dict]:
    out = []
    cells = list(dict.fromkeys(r["cell"] for r in rows))
    for cell in cells:
        group = [r for r in rows if r["cell"] == cell]
        agg = {"cell": cell, "runs": len(group)}
        for key, val in group[0].items():
            if key in ("cell", "seed", "fingerprint") or not isinstance(val, (int, float)):
                continue
            vals = np.array([r[key] for r in group if key in r], dtype=np.float64)
            agg[key] = float(vals.mean())
            if key.endswith("_f1"):
                agg[key.replace("_f1", "_f1_std")] = float(vals.std())
        out.append(agg)
    return out


def grid_to_yaml(grid: GridSpec) -> str:
    return yaml.safe_dump({"base": grid.base, "seeds": grid.seeds, "jobs": grid.jobs,
                           "cells": [{"name": c.name, "set": c.overrides} for c in grid.cells]},
                          sort_keys=False)
