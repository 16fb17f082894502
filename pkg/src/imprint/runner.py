"""Experiment orchestration: configuration grids over tasks and seeds.

A grid is the cross product of imprinting configurations, tasks (embedding
file pairs or synthetic specs, optionally few-shot subsampled), and seeds.
Every cell is evaluated independently; failures become error rows instead of
aborting the sweep. Results are written as CSV with one row per cell plus one
median-over-seeds row per (config, instance), which is what the rank-based
analysis consumes.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dataset import (
    EmbeddingSet,
    SyntheticTaskSpec,
    few_shot_sample,
    load_embeddings,
    synthetic_train_test,
)
from .generate import GenStrategy
from .head import AggMode, ImprintConfig, imprint, predict_batch

RESULT_COLUMNS = ("config_id", "instance_id", "seed", "accuracy", "error")
MEDIAN_SEED = "median"


@dataclass(frozen=True)
class TaskSpec:
    """One evaluation task: file-backed or synthetic train/test sources."""

    name: str
    train_path: str | None = None
    test_path: str | None = None
    synthetic: SyntheticTaskSpec | None = None
    test_samples_per_mode: int | None = None
    few_shot_n: int | None = None

    def __post_init__(self):
        file_backed = self.train_path is not None and self.test_path is not None
        if file_backed == (self.synthetic is not None):
            raise ValueError(
                f"task {self.name!r} must have either train/test paths or a synthetic spec"
            )
        if self.few_shot_n is not None and self.few_shot_n < 1:
            raise ValueError("few_shot_n must be positive")


@dataclass(frozen=True)
class GridSpec:
    configs: tuple[ImprintConfig, ...]
    tasks: tuple[TaskSpec, ...]
    seeds: tuple[int, ...]

    def __post_init__(self):
        if not self.configs or not self.tasks or not self.seeds:
            raise ValueError("configs, tasks, and seeds must all be non-empty")
        labels = [c.label for c in self.configs]
        if len(set(labels)) != len(labels):
            raise ValueError("configuration names/labels must be unique")


def evaluate_config(
    train: EmbeddingSet, test: EmbeddingSet, config: ImprintConfig
) -> float:
    """Imprint on the training set and score accuracy on the test set."""
    if train.dim != test.dim:
        raise ValueError(f"train dim {train.dim} != test dim {test.dim}")
    if train.class_count != test.class_count:
        raise ValueError(
            f"train class count {train.class_count} != test {test.class_count}"
        )
    if train.class_count < 2:
        raise ValueError("evaluation needs at least 2 classes")
    head = imprint(train, config)
    predictions = predict_batch(head, test.vectors)
    return float(np.mean(predictions == test.labels))


def resolve_task(task: TaskSpec, seed: int) -> tuple[EmbeddingSet, EmbeddingSet]:
    """Materialize a task's train/test sets; few-shot sampling uses ``seed``.

    The few-shot draw depends only on (task data, seed), so all configs see
    the same subsample at a given seed and stay comparable pairwise.
    """
    if task.synthetic is not None:
        train, test = synthetic_train_test(
            task.synthetic, test_samples_per_mode=task.test_samples_per_mode
        )
    else:
        train = load_embeddings(task.train_path)
        test = load_embeddings(task.test_path)
    if task.few_shot_n is not None:
        train = few_shot_sample(train, task.few_shot_n, seed)
    return train, test


def _evaluate_cell(payload: tuple[dict, dict, int]) -> dict:
    config_dict, task_dict, seed = payload
    config = config_from_dict(config_dict)
    task = task_from_dict(task_dict)
    row = {
        "config_id": config.label,
        "instance_id": task.name,
        "seed": seed,
        "accuracy": math.nan,
        "error": "",
    }
    try:
        train, test = resolve_task(task, seed)
        row["accuracy"] = evaluate_config(train, test, replace(config, seed=seed))
    except Exception as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_grid(spec: GridSpec, workers: int = 1) -> list[dict]:
    """Evaluate every (config, task, seed) cell and append median rows.

    The output order is canonical (sorted per-seed rows, then sorted median
    rows), so it does not depend on the worker count. Cell failures are
    recorded as rows with NaN accuracy and an error message.
    """
    payloads = [
        (config_to_dict(config), task_to_dict(task), seed)
        for config in spec.configs
        for task in spec.tasks
        for seed in spec.seeds
    ]
    if workers <= 1:
        rows = [_evaluate_cell(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_evaluate_cell, payloads))
    rows.sort(key=lambda r: (r["config_id"], r["instance_id"], r["seed"]))
    medians = []
    for config in spec.configs:
        for task in spec.tasks:
            cell_rows = [
                r
                for r in rows
                if r["config_id"] == config.label and r["instance_id"] == task.name
            ]
            finite = [r["accuracy"] for r in cell_rows if math.isfinite(r["accuracy"])]
            medians.append(
                {
                    "config_id": config.label,
                    "instance_id": task.name,
                    "seed": MEDIAN_SEED,
                    "accuracy": float(np.median(finite)) if finite else math.nan,
                    "error": "" if finite else "all seeds failed",
                }
            )
    medians.sort(key=lambda r: (r["config_id"], r["instance_id"]))
    return rows + medians


def write_results_csv(rows: list[dict], path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            acc = out["accuracy"]
            out["accuracy"] = "nan" if not math.isfinite(acc) else repr(float(acc))
            writer.writerow(out)


def read_results_csv(path) -> list[dict]:
    rows = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in RESULT_COLUMNS[:4] if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: results CSV is missing columns {missing}")
        for record in reader:
            rows.append(
                {
                    "config_id": record["config_id"],
                    "instance_id": record["instance_id"],
                    "seed": record["seed"],
                    "accuracy": float(record["accuracy"]),
                    "error": record.get("error", "") or "",
                }
            )
    if not rows:
        raise ValueError(f"{path}: no result rows")
    return rows


def results_matrix(rows: list[dict]) -> tuple[list[str], list[str], np.ndarray]:
    """Accuracy matrix (configs x instances) from result rows.

    Median rows are preferred when present; otherwise the median over the
    per-seed rows of each cell is taken. Incomplete or non-finite cells are
    an error, because the rank tests need fully paired observations.
    """
    median_rows = [r for r in rows if r["seed"] == MEDIAN_SEED]
    source = median_rows if median_rows else rows
    configs = sorted({r["config_id"] for r in source})
    instances = sorted({r["instance_id"] for r in source})
    cells: dict[tuple[str, str], list[float]] = {}
    for r in source:
        cells.setdefault((r["config_id"], r["instance_id"]), []).append(r["accuracy"])
    matrix = np.empty((len(configs), len(instances)))
    for i, config_id in enumerate(configs):
        for j, instance_id in enumerate(instances):
            values = cells.get((config_id, instance_id))
            if not values:
                raise ValueError(f"missing cell ({config_id}, {instance_id})")
            value = float(np.median(values))
            if not math.isfinite(value):
                raise ValueError(
                    f"cell ({config_id}, {instance_id}) has no finite accuracy"
                )
            matrix[i, j] = value
    return configs, instances, matrix


def _canon_gen_variant(name: str) -> str:
    return name.replace("-", "_")


def config_from_dict(data: dict) -> ImprintConfig:
    """Parse one configuration from its JSON form."""
    gen = GenStrategy(
        _canon_gen_variant(str(data.get("gen", "k_means"))),
        k=int(data.get("k", 1)),
        seed=int(data.get("seed", 0)),
    )
    agg_name = str(data.get("agg", "max")).replace("-", "_")
    agg = AggMode(agg_name, m=int(data.get("m", 1)))
    return ImprintConfig(
        gen=gen,
        norm_pre=str(data.get("norm_pre", "none")),
        norm_post=str(data.get("norm_post", "l2")),
        norm_inf=str(data.get("norm_inf", "l2")),
        agg=agg,
        name=data.get("name"),
    )


def config_to_dict(config: ImprintConfig) -> dict:
    return {
        "name": config.name,
        "gen": config.gen.variant,
        "k": config.gen.k,
        "seed": config.seed if config.seed is not None else config.gen.seed,
        "norm_pre": config.norm_pre,
        "norm_post": config.norm_post,
        "norm_inf": config.norm_inf,
        "agg": config.agg.variant,
        "m": config.agg.m,
    }


def task_from_dict(data: dict) -> TaskSpec:
    synthetic = None
    if "synthetic" in data and data["synthetic"] is not None:
        s = data["synthetic"]
        synthetic = SyntheticTaskSpec(
            class_count=int(s["classes"]),
            modes_per_class=int(s.get("modes", 1)),
            samples_per_mode=int(s["per_mode"]),
            dim=int(s["dim"]),
            mode_separation=float(s.get("sep", 6.0)),
            within_mode_std=float(s.get("std", 1.0)),
            seed=int(s.get("seed", 0)),
        )
    return TaskSpec(
        name=str(data["name"]),
        train_path=data.get("train"),
        test_path=data.get("test"),
        synthetic=synthetic,
        test_samples_per_mode=data.get("test_per_mode"),
        few_shot_n=data.get("few_shot_n"),
    )


def task_to_dict(task: TaskSpec) -> dict:
    out: dict = {"name": task.name}
    if task.synthetic is not None:
        s = task.synthetic
        out["synthetic"] = {
            "classes": s.class_count,
            "modes": s.modes_per_class,
            "per_mode": s.samples_per_mode,
            "dim": s.dim,
            "sep": s.mode_separation,
            "std": s.within_mode_std,
            "seed": s.seed,
        }
    else:
        out["train"] = task.train_path
        out["test"] = task.test_path
    if task.test_samples_per_mode is not None:
        out["test_per_mode"] = task.test_samples_per_mode
    if task.few_shot_n is not None:
        out["few_shot_n"] = task.few_shot_n
    return out


def grid_spec_from_json(data: dict) -> GridSpec:
    """Build a GridSpec from the JSON grid file.

    A top-level ``few_shot`` list expands every task into one variant per n,
    with ``[n=..]`` appended to the instance name. Task-level ``few_shot_n``
    entries are kept as-is.
    """
    configs = tuple(config_from_dict(c) for c in data.get("configs", []))
    tasks = [task_from_dict(t) for t in data.get("tasks", [])]
    few_shot = data.get("few_shot")
    if few_shot:
        expanded = []
        for task in tasks:
            for n in few_shot:
                expanded.append(
                    replace(task, name=f"{task.name}[n={int(n)}]", few_shot_n=int(n))
                )
        tasks = expanded
    seeds = tuple(int(s) for s in data.get("seeds", [0, 1, 2]))
    return GridSpec(configs=configs, tasks=tuple(tasks), seeds=seeds)


def load_grid_spec(path) -> GridSpec:
    with Path(path).open() as fh:
        return grid_spec_from_json(json.load(fh))
