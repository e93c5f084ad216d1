"""Geotechnical data model, CSV ingestion, and a seeded synthetic
multi-borehole site generator.

Eleven soil parameters per record, all positive, each individually optional:
index properties Sr, gamma_t, e, LL, PL, w and mechanical properties su, Eu,
sigma_p, Cc, cv. The synthetic generator draws log-parameters from a depth
trend plus borehole random effect plus latent-factor model, which keeps
everything positive and gives controllable cross-parameter correlations.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .errors import ContractError, DataError

INDEX_PARAMS = ("Sr", "gamma_t", "e", "LL", "PL", "w")
MECHANICAL_PARAMS = ("su", "Eu", "sigma_p", "Cc", "cv")
PARAMS = INDEX_PARAMS + MECHANICAL_PARAMS

CSV_COLUMNS = ("site_id", "borehole_id", "x", "y", "depth") + PARAMS


@dataclass
class BoreholeRecord:
    site_id: str
    borehole_id: str
    x: float
    y: float
    depth: float
    Sr: Optional[float] = None
    gamma_t: Optional[float] = None
    e: Optional[float] = None
    LL: Optional[float] = None
    PL: Optional[float] = None
    w: Optional[float] = None
    su: Optional[float] = None
    Eu: Optional[float] = None
    sigma_p: Optional[float] = None
    Cc: Optional[float] = None
    cv: Optional[float] = None

    def validate(self) -> None:
        if self.depth < 0:
            raise DataError(f"depth must be >= 0, got {self.depth}")
        for p in PARAMS:
            v = getattr(self, p)
            if v is not None and v <= 0:
                raise DataError(f"{p} must be positive when present, got {v}")
        if self.PL is not None and self.LL is not None and self.PL > self.LL:
            raise DataError(f"PL={self.PL} exceeds LL={self.LL}")

    def value(self, param: str) -> Optional[float]:
        if param not in PARAMS:
            raise ContractError(f"unknown parameter {param!r}")
        return getattr(self, param)

    def missing_mechanicals(self) -> tuple[str, ...]:
        return tuple(p for p in sorted(MECHANICAL_PARAMS) if getattr(self, p) is None)

    def key(self) -> tuple[str, str, float]:
        return (self.site_id, self.borehole_id, self.depth)


class SiteTable:
    """Immutable ordered collection of borehole records with a provenance label."""

    def __init__(self, records: list[BoreholeRecord], label: str = ""):
        seen = set()
        for i, r in enumerate(records):
            r.validate()
            k = r.key()
            if k in seen:
                raise DataError(f"duplicate (site_id, borehole_id, depth) key {k} "
                                f"at record {i}")
            seen.add(k)
        self._records = tuple(records)
        self.label = label

    @property
    def records(self) -> tuple[BoreholeRecord, ...]:
        return self._records

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    def borehole_ids(self) -> list[str]:
        """Unique borehole ids in order of first appearance."""
        out, seen = [], set()
        for r in self._records:
            if r.borehole_id not in seen:
                seen.add(r.borehole_id)
                out.append(r.borehole_id)
        return out

    def borehole(self, borehole_id: str) -> list[BoreholeRecord]:
        return [r for r in self._records if r.borehole_id == borehole_id]


def _fmt(v: Optional[float]) -> str:
    return "" if v is None else repr(float(v))


def write_csv(table: SiteTable, path) -> None:
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_COLUMNS)
        for r in table:
            w.writerow([r.site_id, r.borehole_id, _fmt(r.x), _fmt(r.y), _fmt(r.depth)]
                       + [_fmt(getattr(r, p)) for p in PARAMS])
    os.replace(tmp, path)


def load_csv(path, label: str | None = None) -> SiteTable:
    """Parse the documented schema; empty cell = missing. Errors name the
    offending row (1-based, header excluded) and column."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if tuple(header) != CSV_COLUMNS:
            unknown = [c for c in header if c not in CSV_COLUMNS]
            if unknown:
                raise DataError(f"{path}: unknown column(s) {unknown}")
            raise DataError(f"{path}: header mismatch, expected {','.join(CSV_COLUMNS)}")
        records = []
        keys = set()
        for rownum, row in enumerate(reader, start=1):
            if len(row) != len(CSV_COLUMNS):
                raise DataError(f"{path}: row {rownum} has {len(row)} fields, "
                                f"expected {len(CSV_COLUMNS)}")
            vals = dict(zip(CSV_COLUMNS, row))

            def num(col, required=False):
                text = vals[col]
                if text == "":
                    if required:
                        raise DataError(f"{path}: row {rownum}, column {col}: "
                                        "value required")
                    return None
                try:
                    return float(text)
                except ValueError:
                    raise DataError(f"{path}: row {rownum}, column {col}: "
                                    f"unparsable number {text!r}") from None

            if not vals["site_id"] or not vals["borehole_id"]:
                raise DataError(f"{path}: row {rownum}: site_id and borehole_id required")
            rec = BoreholeRecord(
                site_id=vals["site_id"], borehole_id=vals["borehole_id"],
                x=num("x", required=True), y=num("y", required=True),
                depth=num("depth", required=True),
                **{p: num(p) for p in PARAMS},
            )
            try:
                rec.validate()
            except DataError as exc:
                raise DataError(f"{path}: row {rownum}: {exc}") from None
            k = rec.key()
            if k in keys:
                raise DataError(f"{path}: row {rownum}: duplicate key {k}")
            keys.add(k)
            records.append(rec)
    return SiteTable(records, label=label if label is not None else os.fspath(path))


@dataclass
class SynthSiteConfig:
    n_boreholes: int = 30
    records_per_borehole: tuple[int, int] = (10, 20)
    area_extent: float = 1000.0  # square side, meters
    # per-parameter log-space depth trend [intercept, slope, quadratic]
    depth_trend: list = field(default_factory=lambda: _DEFAULT_TREND())
    borehole_effect_scale: list = field(default_factory=lambda: _DEFAULT_EFFECT())
    loadings: list = field(default_factory=lambda: _DEFAULT_LOADINGS())  # 11 x k
    noise_scale: list = field(default_factory=lambda: _DEFAULT_NOISE())
    missing_rate: list = field(default_factory=lambda: _DEFAULT_MISSING())
    depth_jitter: float = 0.2
    site_id: str = "SYNTH"
    seed: int = 0

    def validate(self) -> None:
        if self.n_boreholes < 1:
            raise ContractError("n_boreholes must be >= 1")
        lo, hi = self.records_per_borehole
        if not (1 <= lo <= hi):
            raise ContractError("records_per_borehole range must be non-empty")
        arrs = {
            "depth_trend": np.asarray(self.depth_trend, dtype=float),
            "borehole_effect_scale": np.asarray(self.borehole_effect_scale, dtype=float),
            "loadings": np.asarray(self.loadings, dtype=float),
            "noise_scale": np.asarray(self.noise_scale, dtype=float),
            "missing_rate": np.asarray(self.missing_rate, dtype=float),
        }
        for name, a in arrs.items():
            if not np.all(np.isfinite(a)):
                raise ContractError(f"{name} must be finite")
            if a.shape[0] != len(PARAMS):
                raise ContractError(f"{name} must have {len(PARAMS)} rows")
        if arrs["depth_trend"].shape != (len(PARAMS), 3):
            raise ContractError("depth_trend must be 11 x 3")
        if arrs["loadings"].ndim != 2:
            raise ContractError("loadings must be a 11 x k matrix")
        mr = arrs["missing_rate"]
        if np.any(mr < 0) or np.any(mr >= 1):
            raise ContractError("missing rates must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSiteConfig":
        d = dict(d)
        if "records_per_borehole" in d:
            d["records_per_borehole"] = tuple(d["records_per_borehole"])
        cfg = cls(**d)
        cfg.validate()
        return cfg


def _DEFAULT_TREND():
    # [ln value at surface, per-meter log slope, quadratic term]
    return [
        [4.55, 0.0, 0.0],        # Sr  ~ 95 %
        [2.77, 0.002, 0.0],      # gamma_t ~ 16 kN/m3
        [0.55, -0.005, 0.0],     # e ~ 1.7 decreasing
        [4.40, 0.0, 0.0],        # LL ~ 81 %
        [3.40, 0.0, 0.0],        # PL ~ 30 %
        [4.10, -0.004, 0.0],     # w ~ 60 %
        [3.00, 0.045, 0.0004],   # su ~ 20 kPa growing with depth
        [8.00, 0.045, 0.0004],   # Eu ~ 3000 kPa, tracks su
        [4.60, 0.030, 0.0],      # sigma_p ~ 100 kPa
        [0.00, 0.004, 0.0],      # Cc ~ 1.0
        [4.60, 0.0, 0.0],        # cv ~ 100 cm2/day
    ]


def _DEFAULT_EFFECT():
    return [0.01, 0.01, 0.03, 0.03, 0.03, 0.03, 0.10, 0.10, 0.08, 0.05, 0.08]


def _DEFAULT_LOADINGS():
    # factor 1 couples the mechanical group, factor 2 the plasticity group
    return [
        [0.00, 0.02],   # Sr
        [-0.01, -0.02],  # gamma_t
        [0.02, 0.10],   # e
        [0.02, 0.15],   # LL
        [0.01, 0.10],   # PL
        [0.02, 0.12],   # w
        [0.20, 0.02],   # su
        [0.20, 0.02],   # Eu
        [0.18, 0.02],   # sigma_p
        [0.06, 0.08],   # Cc
        [-0.10, 0.02],  # cv
    ]


def _DEFAULT_NOISE():
    return [0.01, 0.01, 0.04, 0.05, 0.05, 0.05, 0.10, 0.12, 0.10, 0.08, 0.15]


def _DEFAULT_MISSING():
    # index parameters mostly present, mechanical sparse
    return [0.03, 0.03, 0.03, 0.05, 0.05, 0.03, 0.55, 0.75, 0.65, 0.70, 0.75]


def generate_site(cfg: SynthSiteConfig) -> SiteTable:
    """Seeded synthetic site; deterministic for a fixed config."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    trend = np.asarray(cfg.depth_trend, dtype=float)
    effect = np.asarray(cfg.borehole_effect_scale, dtype=float)
    loadings = np.asarray(cfg.loadings, dtype=float)
    noise = np.asarray(cfg.noise_scale, dtype=float)
    missing = np.asarray(cfg.missing_rate, dtype=float)
    k = loadings.shape[1]
    lo, hi = cfg.records_per_borehole

    records: list[BoreholeRecord] = []
    ll_i, pl_i = PARAMS.index("LL"), PARAMS.index("PL")
    for b in range(cfg.n_boreholes):
        bh_id = f"BH{b:03d}"
        bx, by = rng.uniform(0.0, cfg.area_extent, size=2)
        n = int(rng.integers(lo, hi + 1))
        depths = np.arange(1, n + 1) * 1.0 + cfg.depth_jitter * rng.uniform(-1, 1, size=n)
        depths = np.maximum(depths, 0.0)
        u_b = rng.normal(size=len(PARAMS)) * effect
        z = rng.normal(size=(n, k))
        eps = rng.normal(size=(n, len(PARAMS))) * noise
        d = depths[:, None]
        logv = (trend[:, 0][None, :] + trend[:, 1][None, :] * d
                + trend[:, 2][None, :] * d * d + u_b[None, :]
                + z @ loadings.T + eps)
        vals = np.exp(logv)
        vals[:, pl_i] = np.minimum(vals[:, pl_i], vals[:, ll_i])  # enforce PL <= LL
        miss = rng.random(size=(n, len(PARAMS))) < missing[None, :]
        for i in range(n):
            kw = {p: (None if miss[i, j] else float(vals[i, j]))
                  for j, p in enumerate(PARAMS)}
            records.append(BoreholeRecord(
                site_id=cfg.site_id, borehole_id=bh_id,
                x=float(bx), y=float(by), depth=float(depths[i]), **kw))
    return SiteTable(records, label=f"{cfg.site_id}/seed={cfg.seed}")


def split_verification(table: SiteTable, region: tuple[float, float, float, float]
                       ) -> tuple[SiteTable, SiteTable]:
    """Records inside the (x0, y0, x1, y1) rectangle form the verification
    site; the rest form the local BID."""
    x0, y0, x1, y1 = region
    if x1 <= x0 or y1 <= y0:
        raise ContractError("verification region must have positive area")
    inside = [r for r in table if x0 <= r.x <= x1 and y0 <= r.y <= y1]
    outside = [r for r in table if not (x0 <= r.x <= x1 and y0 <= r.y <= y1)]
    if not inside:
        raise DataError("verification region contains no records")
    return (SiteTable(outside, label=f"{table.label}/bid"),
            SiteTable(inside, label=f"{table.label}/verification"))
