"""In-context prediction: one forward pass per task, no gradient updates."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bardist import PredictiveDistribution
from .errors import ContractError
from .model import (
    Checkpoint,
    edges_for_task,
    forward,
    logits_to_distribution,
    target_transform,
)
from .prior import Task


@dataclass
class Prediction:
    """Posterior-predictive summary for one test row, in target units."""

    mean: float
    q025: float
    q500: float
    q975: float
    dist: Optional[PredictiveDistribution] = None
    row_id: Optional[str] = None

    def __post_init__(self):
        if not (self.q025 <= self.q500 <= self.q975):
            raise ContractError("quantiles must be ordered q025 <= q500 <= q975")
        if not np.isfinite(self.mean):
            raise ContractError("predictive mean must be finite")


def predict(checkpoint: Checkpoint, task: Task) -> list[Prediction]:
    """One Prediction per test row; deterministic for a fixed checkpoint/task."""
    if task.n_train < 1:
        raise ContractError("empty training context: need >=1 row with observed target")
    cfg = checkpoint.model_cfg
    strategy = checkpoint.bin_strategy
    params = checkpoint.params()
    a, b = target_transform(strategy, task.y_train)
    edges_std = edges_for_task(strategy, cfg.n_bins, (task.y_train - b) / a)
    logits = forward(cfg, params, task, (a, b))
    out = []
    for row in logits.data:
        dist = logits_to_distribution(row, edges_std, (a, b), strategy.tail_scale)
        out.append(Prediction(
            mean=dist.mean(),
            q025=float(dist.quantile(0.025)),
            q500=float(dist.quantile(0.5)),
            q975=float(dist.quantile(0.975)),
            dist=dist,
        ))
    return out


def export_predictions_csv(predictions: list[Prediction], path,
                           row_ids=None, bins_json_path=None) -> None:
    """CSV with (row_id, mean, q025, q500, q975); optional full bin dump."""
    if row_ids is not None and len(row_ids) != len(predictions):
        raise ContractError("row_ids length must match predictions")
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["row_id", "mean", "q025", "q500", "q975"])
        for i, p in enumerate(predictions):
            rid = row_ids[i] if row_ids is not None else (p.row_id or str(i))
            w.writerow([rid, repr(p.mean), repr(p.q025), repr(p.q500), repr(p.q975)])
    os.replace(tmp, path)
    if bins_json_path is not None:
        dump = []
        for i, p in enumerate(predictions):
            rid = row_ids[i] if row_ids is not None else (p.row_id or str(i))
            entry = {"row_id": rid}
            if p.dist is not None:
                entry["edges"] = p.dist.edges.tolist()
                entry["masses"] = p.dist.masses.tolist()
                entry["tail_lo"] = p.dist.tail_lo
                entry["tail_hi"] = p.dist.tail_hi
            dump.append(entry)
        tmp = f"{os.fspath(bins_json_path)}.tmp"
        with open(tmp, "w") as f:
            json.dump(dump, f)
        os.replace(tmp, bins_json_path)
