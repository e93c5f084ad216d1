"""Build PFN tasks for the benchmark scenarios.

Benchmark #1 predicts a target parameter (usually su) along borehole depth
profiles, either one borehole at a time or for all boreholes in one context.
Benchmark #2 imputes missing mechanical parameters per (missingness pattern,
target parameter) pair. Every builder asserts leak-freedom: no task ever
contains a test row whose target is observed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContextError, ContractError
from .geodata import MECHANICAL_PARAMS, PARAMS, BoreholeRecord, SiteTable
from .prior import Task

COORD_FEATURES = ("x", "y", "depth")
CATEGORICAL_FEATURES = ("site_id", "borehole_id")

# "4-view": coordinates + depth + target; "11-view": everything else too
VIEW_4 = list(COORD_FEATURES)


def view_features(view: str, target: str) -> list[str]:
    if view in ("4", 4):
        return list(COORD_FEATURES)
    if view in ("11", 11):
        return list(COORD_FEATURES) + [p for p in PARAMS if p != target]
    raise ContractError(f"unknown feature view {view!r} (expected '4' or '11')")


@dataclass
class ContextSpec:
    bid: SiteTable
    features: list[str]
    target: str
    scenario: str  # individual | simultaneous | imputation
    target_boreholes: Optional[list[str]] = None

    def validate(self) -> None:
        if not self.features:
            raise ContractError("feature subset must be non-empty")
        if self.target in self.features:
            raise ContractError("target column must not appear in the feature subset")
        if self.target not in PARAMS:
            raise ContractError(f"unknown target parameter {self.target!r}")
        if self.scenario not in ("individual", "simultaneous", "imputation"):
            raise ContractError(f"unknown scenario {self.scenario!r}")
        for f in self.features:
            if f not in COORD_FEATURES + CATEGORICAL_FEATURES + PARAMS:
                raise ContractError(f"unknown feature column {f!r}")


@dataclass
class MissingnessPattern:
    missing: tuple[str, ...]  # subset of the mechanical parameters
    record_keys: list[tuple]

    def __post_init__(self):
        if not self.missing:
            raise ContractError("a missingness pattern needs a non-empty missing set")
        for p in self.missing:
            if p not in MECHANICAL_PARAMS:
                raise ContractError(f"{p!r} is not a mechanical parameter")


@dataclass
class ContextTask:
    """A built task plus the manifest metadata describing its provenance."""

    task: Task
    scenario: str
    target: str
    bid_label: str
    borehole_ids: list[str]
    test_keys: list[tuple]
    pattern: Optional[tuple[str, ...]] = None
    subsample_seed: Optional[int] = None
    n_bid_rows_used: int = 0
    warning: Optional[str] = None

    def manifest_entry(self) -> dict:
        return {
            "scenario": self.scenario,
            "target": self.target,
            "bid": self.bid_label,
            "boreholes": list(self.borehole_ids),
            "pattern": list(self.pattern) if self.pattern else None,
            "n_train": self.task.n_train,
            "n_test": self.task.n_test,
            "n_bid_rows_used": self.n_bid_rows_used,
            "subsample_seed": self.subsample_seed,
            "warning": self.warning,
        }


def _vocab(*tables) -> dict[str, dict[str, int]]:
    """Stable integer codes: sorted unique values per categorical column."""
    out = {}
    for col in CATEGORICAL_FEATURES:
        values = sorted({getattr(r, col) for t in tables for r in t})
        out[col] = {v: i for i, v in enumerate(values)}
    return out


def _rows_to_matrix(records: list[BoreholeRecord], features: list[str],
                    vocab) -> tuple[np.ndarray, np.ndarray]:
    X = np.zeros((len(records), len(features)))
    M = np.zeros((len(records), len(features)), dtype=bool)
    for i, r in enumerate(records):
        for j, f in enumerate(features):
            if f in COORD_FEATURES:
                X[i, j] = getattr(r, f)
            elif f in CATEGORICAL_FEATURES:
                X[i, j] = vocab[f][getattr(r, f)]
            else:
                v = r.value(f)
                if v is None:
                    M[i, j] = True
                else:
                    X[i, j] = v
    return X, M


def _schema(features: list[str]) -> list[str]:
    return ["categorical" if f in CATEGORICAL_FEATURES else "continuous"
            for f in features]


def _subsample_bid(bid_records, budget: int, seed: Optional[int]):
    """Uniform BID subsample when the context exceeds model capacity; site
    rows are never dropped, only BID rows."""
    if budget >= len(bid_records):
        return list(bid_records), None
    if seed is None:
        raise ContextError(
            f"context needs {len(bid_records)} BID rows but only {budget} fit; "
            "pass a subsample seed to truncate")
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(len(bid_records), size=budget, replace=False))
    return [bid_records[i] for i in keep], seed


def _build(spec: ContextSpec, train_records, test_records, *,
           borehole_ids, pattern=None, max_rows=None, subsample_seed=None,
           bid_row_count=0, warning=None) -> ContextTask:
    target = spec.target
    for r in test_records:
        if r.value(target) is not None:
            raise ContextError(f"leak: test record {r.key()} has observed {target}")
    site_rows = list(train_records[bid_row_count:])
    # only BID rows with an observed target can serve as labeled examples
    bid_rows = [r for r in train_records[:bid_row_count]
                if r.value(target) is not None]
    used_seed = None
    if max_rows is not None:
        budget = max_rows - len(test_records) - len(site_rows)
        if budget < 0:
            raise ContextError("site rows alone exceed the model capacity")
        bid_rows, used_seed = _subsample_bid(bid_rows, budget, subsample_seed)
    train_records = bid_rows + site_rows

    if not train_records:
        raise ContextError("empty training context")
    vocab = _vocab(train_records, test_records)
    X_tr, m_tr = _rows_to_matrix(train_records, spec.features, vocab)
    X_te, m_te = _rows_to_matrix(test_records, spec.features, vocab)
    y_tr = np.array([r.value(target) for r in train_records], dtype=float)
    task = Task(X_train=X_tr, m_train=m_tr, y_train=y_tr,
                X_test=X_te, m_test=m_te, y_test=None,
                schema=_schema(spec.features))
    return ContextTask(
        task=task, scenario=spec.scenario, target=target,
        bid_label=spec.bid.label, borehole_ids=list(borehole_ids),
        test_keys=[r.key() for r in test_records], pattern=pattern,
        subsample_seed=used_seed, n_bid_rows_used=len(bid_rows), warning=warning)


def build_individual(spec: ContextSpec, site: SiteTable, borehole_id: str,
                     max_rows=None, subsample_seed=None) -> ContextTask:
    """Train = BID rows plus target-borehole rows with observed target;
    test = target-borehole rows missing the target."""
    spec.validate()
    if spec.scenario != "individual":
        raise ContractError("spec.scenario must be 'individual'")
    bh = site.borehole(borehole_id)
    if not bh:
        raise ContextError(f"borehole {borehole_id!r} not found in {site.label!r}")
    observed = [r for r in bh if r.value(spec.target) is not None]
    test = [r for r in bh if r.value(spec.target) is None]
    warning = None
    if not test:
        warning = f"borehole {borehole_id} fully observed: empty test set"
    if not observed and len(spec.bid) == 0:
        raise ContextError(
            f"empty context: no observed {spec.target} in {borehole_id} and empty BID")
    train = list(spec.bid.records) + observed
    return _build(spec, train, test, borehole_ids=[borehole_id],
                  max_rows=max_rows, subsample_seed=subsample_seed,
                  bid_row_count=len(spec.bid), warning=warning)


def build_simultaneous(spec: ContextSpec, site: SiteTable, borehole_ids: list[str],
                       max_rows=None, subsample_seed=None) -> ContextTask:
    """One context covering all listed boreholes; borehole identity is
    carried as an integer-coded feature."""
    spec.validate()
    if spec.scenario != "simultaneous":
        raise ContractError("spec.scenario must be 'simultaneous'")
    if len(borehole_ids) < 2:
        raise ContractError("simultaneous prediction needs >= 2 boreholes")
    if "borehole_id" not in spec.features:
        spec = ContextSpec(bid=spec.bid, features=spec.features + ["borehole_id"],
                           target=spec.target, scenario=spec.scenario,
                           target_boreholes=spec.target_boreholes)
    observed, test = [], []
    for bh_id in borehole_ids:
        bh = site.borehole(bh_id)
        if not bh:
            raise ContextError(f"borehole {bh_id!r} not found in {site.label!r}")
        observed += [r for r in bh if r.value(spec.target) is not None]
        test += [r for r in bh if r.value(spec.target) is None]
    if not observed and len(spec.bid) == 0:
        raise ContextError("empty context: no observed targets and empty BID")
    train = list(spec.bid.records) + observed
    return _build(spec, train, test, borehole_ids=list(borehole_ids),
                  max_rows=max_rows, subsample_seed=subsample_seed,
                  bid_row_count=len(spec.bid))


def detect_patterns(records) -> list[MissingnessPattern]:
    """Partition incomplete records by their exact missing-mechanical set,
    ordered lexicographically by parameter names."""
    groups: dict[tuple[str, ...], list] = {}
    for r in records:
        missing = r.missing_mechanicals()
        if missing:
            groups.setdefault(missing, []).append(r.key())
    return [MissingnessPattern(missing=k, record_keys=groups[k])
            for k in sorted(groups)]


def build_imputation(bid: SiteTable, problem_records, pattern: MissingnessPattern,
                     target_param: str, max_rows=None,
                     subsample_seed=None) -> ContextTask:
    """Train = full BID plus problem records with the target observed; test =
    the pattern's records, with whatever measurements remain as features."""
    if target_param not in pattern.missing:
        raise ContractError(
            f"target {target_param!r} is not missing in pattern {pattern.missing}")
    spec = ContextSpec(
        bid=bid,
        features=list(COORD_FEATURES) + [p for p in PARAMS if p != target_param],
        target=target_param, scenario="imputation")
    spec.validate()
    keys = set(pattern.record_keys)
    test = [r for r in problem_records if r.key() in keys]
    observed = [r for r in problem_records
                if r.key() not in keys and r.value(target_param) is not None]
    train = list(bid.records) + observed
    if not any(r.value(target_param) is not None for r in train):
        raise ContextError(f"empty context: {target_param} observed in zero train rows")
    return _build(spec, train, test, borehole_ids=sorted({r.borehole_id for r in test}),
                  pattern=pattern.missing, max_rows=max_rows,
                  subsample_seed=subsample_seed, bid_row_count=len(bid))


def withhold_target(site: SiteTable, borehole_ids: list[str], target: str,
                    fraction: float, seed: int) -> tuple[SiteTable, dict]:
    """Engineer a prediction problem from a fully observed site: withhold the
    target on a seeded random subset of each listed borehole's rows. Returns
    the masked table plus the withheld truth keyed by record key."""
    import dataclasses

    if not (0.0 < fraction < 1.0):
        raise ContractError("withhold fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    truth: dict[tuple, float] = {}
    masked = []
    for bh_id in borehole_ids:
        rows = [r for r in site if r.borehole_id == bh_id
                and r.value(target) is not None]
        if len(rows) < 2:
            raise ContextError(f"borehole {bh_id!r} has fewer than 2 observed "
                               f"{target} rows")
        n_hold = min(len(rows) - 1, max(1, round(fraction * len(rows))))
        held = {rows[i].key() for i in rng.choice(len(rows), size=n_hold,
                                                  replace=False)}
        for r in rows:
            if r.key() in held:
                truth[r.key()] = r.value(target)
    for r in site:
        if r.key() in truth:
            masked.append(dataclasses.replace(r, **{target: None}))
        else:
            masked.append(r)
    return SiteTable(masked, label=site.label), truth


def engineer_patterns(records, pattern_specs: list[dict], seed: int
                      ) -> tuple[list, dict]:
    """Withhold mechanical parameters from fully observed records according
    to pattern specs [{"missing": [...], "n_records": k}, ...]. Returns
    (masked records, truth dict keyed by (record key, parameter))."""
    import dataclasses

    eligible = [r for r in records
                if all(r.value(p) is not None for p in MECHANICAL_PARAMS)]
    need = sum(int(s["n_records"]) for s in pattern_specs)
    if need > len(eligible):
        raise ContextError(f"need {need} fully observed records, "
                           f"have {len(eligible)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(eligible))
    truth: dict[tuple, float] = {}
    masked_by_key = {}
    pos = 0
    for s in pattern_specs:
        missing = tuple(sorted(s["missing"]))
        for p in missing:
            if p not in MECHANICAL_PARAMS:
                raise ContractError(f"{p!r} is not a mechanical parameter")
        for i in order[pos:pos + int(s["n_records"])]:
            r = eligible[i]
            for p in missing:
                truth[(r.key(), p)] = r.value(p)
            masked_by_key[r.key()] = dataclasses.replace(
                r, **{p: None for p in missing})
        pos += int(s["n_records"])
    out = [masked_by_key.get(r.key(), r) for r in records]
    return out, truth
