"""Synthetic supervised tasks for meta-training.

Two task families:

* ``scm`` — a random DAG over latent and feature nodes; each non-root node is
  an affine map, a small tanh MLP, or a piecewise-constant step function of
  its parents plus innovation noise. The target is a child of observed
  feature nodes with its own observation noise. This is our own desk-scale
  concretization; nothing here claims to replicate any released prior.
* ``conjugate`` — featureless Normal-Normal tasks whose posterior predictive
  is available in closed form, used as a calibration oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .errors import ContractError, PriorError

MECHANISMS = ("linear", "mlp", "piecewise")


@dataclass
class Task:
    """One in-context episode: train rows with targets, test rows to predict."""

    X_train: np.ndarray  # (n_train, n_features)
    m_train: np.ndarray  # bool mask, True = missing
    y_train: np.ndarray  # (n_train,)
    X_test: np.ndarray
    m_test: np.ndarray
    y_test: Optional[np.ndarray]
    schema: list[str]  # per-feature kind: "continuous" | "categorical"

    def __post_init__(self):
        n_feat = len(self.schema)
        if self.X_train.shape[1] != n_feat or self.X_test.shape[1] != n_feat:
            raise ContractError("train/test feature counts must match the schema")
        if self.X_train.shape != self.m_train.shape or self.X_test.shape != self.m_test.shape:
            raise ContractError("missing masks must match X shapes")
        if self.y_train.shape[0] != self.X_train.shape[0]:
            raise ContractError("y_train length must equal X_train row count")
        if self.y_test is not None and self.y_test.shape[0] != self.X_test.shape[0]:
            raise ContractError("y_test length must equal X_test row count")

    @property
    def n_train(self) -> int:
        return self.X_train.shape[0]

    @property
    def n_test(self) -> int:
        return self.X_test.shape[0]

    @property
    def n_features(self) -> int:
        return len(self.schema)


@dataclass
class PriorConfig:
    family: str = "scm"
    max_features: int = 6
    max_rows: int = 60
    min_rows: int = 8
    hidden_width: tuple[int, int] = (4, 16)
    depth: tuple[int, int] = (0, 2)  # extra latent DAG nodes
    noise_scale: tuple[float, float] = (0.01, 0.3)
    missing_input_rate: tuple[float, float] = (0.0, 0.2)
    categorical_feature_rate: float = 0.1
    mix_weights: dict = field(
        default_factory=lambda: {"linear": 0.4, "mlp": 0.4, "piecewise": 0.2}
    )
    seed: int = 0
    # conjugate-family hyperparameters (ignored for family="scm")
    conj_mu0: float = 0.0
    conj_tau0_sq: float = 1.0
    conj_sigma_sq: float = 1.0
    conj_train_rows: tuple[int, int] = (1, 30)
    conj_test_rows: tuple[int, int] = (1, 4)

    def validate(self) -> None:
        if self.family not in ("scm", "conjugate"):
            raise ContractError(f"unknown prior family {self.family!r}")
        if self.max_features < 1 or self.max_rows < 3:
            raise ContractError("max_features >= 1 and max_rows >= 3 required")
        if self.min_rows < 3 or self.min_rows > self.max_rows:
            raise ContractError("need 3 <= min_rows <= max_rows")
        for name, rng in (
            ("hidden_width", self.hidden_width),
            ("depth", self.depth),
            ("noise_scale", self.noise_scale),
            ("missing_input_rate", self.missing_input_rate),
            ("conj_train_rows", self.conj_train_rows),
            ("conj_test_rows", self.conj_test_rows),
        ):
            if rng[0] > rng[1]:
                raise ContractError(f"{name} range is empty: {rng}")
        if self.noise_scale[0] < 0:
            raise ContractError("noise_scale must be non-negative")
        if not (0.0 <= self.missing_input_rate[0] and self.missing_input_rate[1] < 1.0):
            raise ContractError("missing_input_rate must lie in [0, 1)")
        if not (0.0 <= self.categorical_feature_rate < 1.0):
            raise ContractError("categorical_feature_rate must lie in [0, 1)")
        w = self.mix_weights
        if set(w) != set(MECHANISMS) or any(v < 0 for v in w.values()):
            raise ContractError("mix_weights needs non-negative linear/mlp/piecewise")
        if abs(sum(w.values()) - 1.0) > 1e-9:
            raise ContractError("mix_weights must sum to 1")
        if self.conj_tau0_sq < 0 or self.conj_sigma_sq <= 0:
            raise ContractError("conjugate variances must be positive (tau0_sq >= 0)")
        if self.conj_train_rows[0] < 1 or self.conj_test_rows[0] < 1:
            raise ContractError("conjugate row ranges start at 1")

    def to_json(self) -> str:
        d = asdict(self)
        for k in ("hidden_width", "depth", "noise_scale", "missing_input_rate",
                  "conj_train_rows", "conj_test_rows"):
            d[k] = list(d[k])
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PriorConfig":
        d = json.loads(text)
        for k in ("hidden_width", "depth", "noise_scale", "missing_input_rate",
                  "conj_train_rows", "conj_test_rows"):
            if k in d:
                d[k] = tuple(d[k])
        cfg = cls(**d)
        cfg.validate()
        return cfg


def _rng_of(rng_state) -> np.random.Generator:
    if isinstance(rng_state, np.random.Generator):
        return rng_state
    return np.random.default_rng(rng_state)


def _mechanism(rng: np.random.Generator, kind: str, parents: np.ndarray,
               hidden_width: tuple[int, int]) -> np.ndarray:
    """Apply a freshly sampled mechanism to parent values (rows, n_par)."""
    n_par = parents.shape[1]
    if kind == "linear":
        w = rng.normal(0.0, 1.0, size=n_par) / np.sqrt(n_par)
        b = rng.normal(0.0, 0.5)
        return parents @ w + b
    if kind == "mlp":
        h = int(rng.integers(hidden_width[0], hidden_width[1] + 1))
        w1 = rng.normal(0.0, 1.0, size=(n_par, h)) / np.sqrt(n_par)
        b1 = rng.normal(0.0, 0.5, size=h)
        w2 = rng.normal(0.0, 1.0, size=h) / np.sqrt(h)
        return np.tanh(parents @ w1 + b1) @ w2 * 2.0
    if kind == "piecewise":
        w = rng.normal(0.0, 1.0, size=n_par) / np.sqrt(n_par)
        proj = parents @ w
        k = int(rng.integers(2, 5))  # 2..4 steps
        thresholds = np.quantile(proj, np.linspace(0, 1, k + 1)[1:-1])
        levels = rng.normal(0.0, 1.0, size=k)
        return levels[np.searchsorted(thresholds, proj)]
    raise ContractError(f"unknown mechanism {kind!r}")


def _sample_scm_once(cfg: PriorConfig, rng: np.random.Generator) -> Task:
    n_feat = int(rng.integers(1, cfg.max_features + 1))
    n_rows = int(rng.integers(max(3, cfg.min_rows), cfg.max_rows + 1))
    n_lat = int(rng.integers(cfg.depth[0], cfg.depth[1] + 1))
    n_nodes = n_feat + n_lat
    kinds = list(MECHANISMS)
    probs = np.array([cfg.mix_weights[k] for k in kinds])

    values = np.empty((n_rows, n_nodes))
    for i in range(n_nodes):
        is_root = i == 0 or rng.random() < 0.25
        if is_root:
            if rng.random() < 0.5:
                values[:, i] = rng.normal(0.0, 1.0, size=n_rows)
            else:
                values[:, i] = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=n_rows)
        else:
            n_par = int(rng.integers(1, min(3, i) + 1))
            par_idx = rng.choice(i, size=n_par, replace=False)
            kind = kinds[rng.choice(len(kinds), p=probs)]
            out = _mechanism(rng, kind, values[:, par_idx], cfg.hidden_width)
            sigma = rng.uniform(*cfg.noise_scale)
            values[:, i] = out + sigma * rng.normal(0.0, 1.0, size=n_rows)

    feat_idx = rng.choice(n_nodes, size=n_feat, replace=False)
    X = values[:, feat_idx].copy()

    # target is a child of observed features so that, under a pure-linear
    # noise-free draw, y is exactly affine in the features
    n_tpar = int(rng.integers(1, min(3, n_feat) + 1))
    tpar = rng.choice(n_feat, size=n_tpar, replace=False)
    kind = kinds[rng.choice(len(kinds), p=probs)]
    y = _mechanism(rng, kind, X[:, tpar], cfg.hidden_width)
    obs_sigma = rng.uniform(*cfg.noise_scale)
    y = y + obs_sigma * rng.normal(0.0, 1.0, size=n_rows)

    schema = ["continuous"] * n_feat
    for j in range(n_feat):
        if rng.random() < cfg.categorical_feature_rate:
            k = int(rng.integers(2, 7))
            edges = np.quantile(X[:, j], np.linspace(0, 1, k + 1)[1:-1])
            X[:, j] = np.searchsorted(edges, X[:, j]).astype(float)
            schema[j] = "categorical"

    miss_rate = rng.uniform(*cfg.missing_input_rate)
    mask = rng.random(size=X.shape) < miss_rate
    X = np.where(mask, 0.0, X)

    perm = rng.permutation(n_rows)
    n_train = int(rng.integers(2, n_rows))  # >= 2 train, >= 1 test
    tr, te = perm[:n_train], perm[n_train:]
    return Task(
        X_train=X[tr], m_train=mask[tr], y_train=y[tr],
        X_test=X[te], m_test=mask[te], y_test=y[te],
        schema=schema,
    )


def sample_task(cfg: PriorConfig, rng_state) -> Task:
    """Draw one task; degenerate draws (constant target) are resampled."""
    cfg.validate()
    rng = _rng_of(rng_state)
    if cfg.family == "conjugate":
        n_train = int(rng.integers(cfg.conj_train_rows[0], cfg.conj_train_rows[1] + 1))
        n_test = int(rng.integers(cfg.conj_test_rows[0], cfg.conj_test_rows[1] + 1))
        return sample_conjugate_task(
            cfg.conj_mu0, cfg.conj_tau0_sq, cfg.conj_sigma_sq, n_train, n_test, rng
        )
    for _ in range(16):
        task = _sample_scm_once(cfg, rng)
        y_all = np.concatenate([task.y_train, task.y_test])
        if np.std(y_all) > 1e-8:
            return task
    raise PriorError("16 consecutive degenerate draws (constant target)")


def sample_conjugate_task(mu0: float, tau0_sq: float, sigma_sq: float,
                          n_train: int, n_test: int, rng_state) -> Task:
    """Featureless Normal-Normal task: m ~ N(mu0, tau0_sq), y ~ N(m, sigma_sq)."""
    if n_train < 1:
        raise ContractError("conjugate tasks need n_train >= 1")
    if n_test < 1:
        raise ContractError("conjugate tasks need n_test >= 1")
    if sigma_sq <= 0 or tau0_sq < 0:
        raise ContractError("variances must be positive (tau0_sq >= 0)")
    rng = _rng_of(rng_state)
    m = mu0 + np.sqrt(tau0_sq) * rng.normal()
    y = m + np.sqrt(sigma_sq) * rng.normal(size=n_train + n_test)

    def rows(n):
        return np.zeros((n, 0)), np.zeros((n, 0), dtype=bool)

    X_tr, m_tr = rows(n_train)
    X_te, m_te = rows(n_test)
    return Task(X_train=X_tr, m_train=m_tr, y_train=y[:n_train],
                X_test=X_te, m_test=m_te, y_test=y[n_train:], schema=[])


def conjugate_posterior_predictive(mu0: float, tau0_sq: float, sigma_sq: float,
                                   y_train: np.ndarray) -> tuple[float, float]:
    """Exact Normal posterior predictive (mean, variance) for one test draw."""
    y = np.asarray(y_train, dtype=np.float64)
    n = y.size
    if n < 1:
        raise ContractError("need at least one observation")
    if tau0_sq == 0.0:
        return float(mu0), float(sigma_sq)
    prec = 1.0 / tau0_sq + n / sigma_sq
    mean = (mu0 / tau0_sq + y.sum() / sigma_sq) / prec
    return float(mean), float(1.0 / prec + sigma_sq)
