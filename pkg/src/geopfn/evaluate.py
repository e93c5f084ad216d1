"""Metrics and reporting: RMSE of predictive means, 95%-interval coverage,
wall-clock phase accounting, and table rendering.

Runtime attribution is asymmetric by design: PFN timings cover context build
plus forward pass (pre-training is a one-time sunk cost), baseline timings
cover fit plus inference. Reports label this via caveat strings.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

import numpy as np

from .errors import ContractError
from .infer import Prediction


def rmse(pred_means, truths) -> float:
    p = np.asarray(pred_means, dtype=float)
    t = np.asarray(truths, dtype=float)
    if p.shape != t.shape:
        raise ContractError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size < 1:
        raise ContractError("rmse needs at least one pair")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def coverage95(predictions: list[Prediction], truths) -> float:
    """Fraction of truths inside their closed [q025, q975] interval."""
    t = np.asarray(truths, dtype=float)
    if len(predictions) != t.size:
        raise ContractError(f"length mismatch: {len(predictions)} vs {t.size}")
    if t.size < 1:
        raise ContractError("coverage needs at least one pair")
    lo = np.array([p.q025 for p in predictions])
    hi = np.array([p.q975 for p in predictions])
    return float(np.mean((t >= lo) & (t <= hi)))


def timeit(label: str, thunk: Callable):
    """Run thunk, returning (result, monotonic-clock seconds)."""
    t0 = time.perf_counter()
    result = thunk()
    return result, time.perf_counter() - t0


@dataclass
class GroupMetrics:
    group: str  # borehole id or parameter name
    rmse: float
    coverage: float
    n: int

    def __post_init__(self):
        if not (0.0 <= self.coverage <= 1.0):
            raise ContractError("coverage must lie in [0, 1]")
        if self.n < 1:
            raise ContractError("each reported group needs n >= 1")


@dataclass
class MetricReport:
    label: str  # e.g. "bench1/pfn/individual/Local-BID"
    groups: list[GroupMetrics]
    timings: dict = field(default_factory=dict)  # phase -> seconds
    caveats: list[str] = field(default_factory=list)
    manifest: Optional[str] = None

    def pooled_rmse(self) -> float:
        """n-weighted pooled RMSE across groups (equals the all-rows RMSE)."""
        n = sum(g.n for g in self.groups)
        mse = sum(g.n * g.rmse ** 2 for g in self.groups) / n
        return float(np.sqrt(mse))

    def pooled_coverage(self) -> float:
        n = sum(g.n for g in self.groups)
        return float(sum(g.n * g.coverage for g in self.groups) / n)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        groups = [GroupMetrics(**g) for g in d["groups"]]
        return cls(label=d["label"], groups=groups,
                   timings=dict(d.get("timings", {})),
                   caveats=list(d.get("caveats", [])),
                   manifest=d.get("manifest"))


def group_metrics(group: str, predictions: list[Prediction], truths) -> GroupMetrics:
    return GroupMetrics(
        group=group,
        rmse=rmse([p.mean for p in predictions], truths),
        coverage=coverage95(predictions, truths),
        n=len(predictions),
    )


def _atomic_write(path, text: str) -> None:
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", newline="") as f:
        f.write(text)
    os.replace(tmp, path)


def report(reports: list[MetricReport], out_dir, basename: str = "metrics") -> dict:
    """Write metric tables as CSV and JSON; returns the written paths.

    The CSV carries one row per (report, group) and is deterministic for a
    fixed input; timings live in a separate runtime CSV so that metric files
    are bit-reproducible across runs.
    """
    if not reports:
        raise ContractError("no metric reports to write")
    seen = set()
    for r in reports:
        for g in r.groups:
            key = (r.label, g.group)
            if key in seen:
                raise ContractError(f"conflicting group key {key}")
            seen.add(key)
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{basename}.csv")
    json_path = os.path.join(out_dir, f"{basename}.json")
    runtime_path = os.path.join(out_dir, f"{basename}_runtime.csv")

    lines = ["report,group,rmse,coverage,n"]
    for r in reports:
        for g in r.groups:
            lines.append(f"{r.label},{g.group},{repr(g.rmse)},{repr(g.coverage)},{g.n}")
        lines.append(f"{r.label},__pooled__,{repr(r.pooled_rmse())},"
                     f"{repr(r.pooled_coverage())},{sum(g.n for g in r.groups)}")
    _atomic_write(csv_path, "\n".join(lines) + "\n")

    _atomic_write(json_path, json.dumps([r.to_dict() for r in reports],
                                        sort_keys=True, indent=2) + "\n")

    rt_lines = ["report,phase,seconds"]
    for r in reports:
        for phase in sorted(r.timings):
            rt_lines.append(f"{r.label},{phase},{repr(float(r.timings[phase]))}")
    _atomic_write(runtime_path, "\n".join(rt_lines) + "\n")
    return {"csv": csv_path, "json": json_path, "runtime": runtime_path}


def load_reports_json(path) -> list[MetricReport]:
    with open(path) as f:
        data = json.load(f)
    return [MetricReport.from_dict(d) for d in data]


def render_runtime_table(rows: list[tuple]) -> str:
    """Benchmark #1 runtime table: one line per BID,
    'BID | HBM t | individual t | simultaneous t' (seconds, N/A allowed)."""
    if not rows:
        raise ContractError("no runtime rows to render")
    out = []
    for bid, hbm_s, indiv_s, simul_s in rows:
        def fmt(v):
            return "N/A" if v is None else f"{v:.0f}"
        out.append(f"{bid} | HBM {fmt(hbm_s)} | individual {fmt(indiv_s)} "
                   f"| simultaneous {fmt(simul_s)}")
    return "\n".join(out)


def render_bench2_summary(hbm_seconds: float, pfn_total_seconds: float) -> str:
    """Benchmark #2 runtime summary: single HBM fit vs cumulative PFN runs."""
    return f"HBM {hbm_seconds:.0f} / PFN-total {pfn_total_seconds:.0f}"


def write_predictions_table(path, rows: list[dict]) -> None:
    """Per-test-row dump joining predictions with known truths, incl. the
    per-point interval indicator (the 'per-depth-point' coverage view)."""
    if not rows:
        raise ContractError("no prediction rows to write")
    cols = ["report", "group", "site_id", "borehole_id", "depth",
            "mean", "q025", "q500", "q975", "truth", "covered"]
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow({c: r.get(c, "") for c in cols})
    os.replace(tmp, path)
