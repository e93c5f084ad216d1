"""The PFN network: per-cell embeddings, alternating attention along the
feature axis (within a row) and the sample axis (within a column), and a
piecewise-constant distribution head over the target.

There is no positional information across rows or feature columns, which is
what makes permutation invariance structural; the target column is marked by
a learned column-type embedding, never by index. Test-row target cells carry
a learned query embedding and are masked out as keys in sample-axis
attention, so test targets can never leak into any prediction.
"""

from __future__ import annotations

import io
import json
import math
import os
import struct
import tempfile
from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .bardist import PredictiveDistribution, equal_mass_edges, uniform_edges
from .errors import (
    CapacityError,
    ContractError,
    CorruptHeaderError,
    NotACheckpointError,
    TruncatedBlobError,
    VersionMismatchError,
)
from .prior import PriorConfig, Task

MAGIC = b"PFN1"
FORMAT_VERSION = 1
ATTENTION_MASK = -1e9  # additive pre-softmax logit for masked keys


@dataclass
class ModelConfig:
    embed_dim: int = 64
    n_layers: int = 4
    n_heads: int = 4
    mlp_hidden: int = 128
    n_bins: int = 64
    dropout_rate: float = 0.0
    max_features: int = 16
    max_rows: int = 1024

    def validate(self) -> None:
        if self.embed_dim % self.n_heads != 0:
            raise ContractError("embed_dim must be divisible by n_heads")
        if self.n_bins < 8:
            raise ContractError("n_bins must be >= 8")
        if min(self.embed_dim, self.n_layers, self.n_heads, self.mlp_hidden) < 1:
            raise ContractError("model sizes must be positive")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ContractError("dropout_rate must lie in [0, 1)")


@dataclass
class BinStrategy:
    """How per-task bin edges are derived for the distribution head."""

    mode: str = "per_task_equal_mass"  # or "fixed_uniform"
    bound: float = 4.0  # quantile clamp, or half-range for fixed_uniform
    tail_scale: float = 1.0  # half-Normal scale of the outer bins (standardized units)

    def validate(self) -> None:
        if self.mode not in ("per_task_equal_mass", "fixed_uniform"):
            raise ContractError(f"unknown bin strategy {self.mode!r}")
        if self.bound <= 0 or self.tail_scale <= 0:
            raise ContractError("bin strategy bound and tail_scale must be positive")


def target_transform(strategy: BinStrategy, y_train: np.ndarray) -> tuple[float, float]:
    """Affine (a, b) such that standardized targets are (y - b) / a."""
    if strategy.mode == "fixed_uniform":
        return 1.0, 0.0
    b = float(np.mean(y_train))
    a = float(np.std(y_train))
    if a < 1e-8:
        a = 1.0
    return a, b


def edges_for_task(strategy: BinStrategy, n_bins: int, y_train_std: np.ndarray) -> np.ndarray:
    strategy.validate()
    if strategy.mode == "fixed_uniform":
        return uniform_edges(strategy.bound, n_bins)
    return equal_mass_edges(y_train_std, n_bins, clamp=strategy.bound)


def param_spec(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Ordered name -> shape map of every trainable tensor."""
    d, h, nb = cfg.embed_dim, cfg.mlp_hidden, cfg.n_bins
    spec: dict[str, tuple[int, ...]] = {
        "embed.feat_val": (1, d),
        "embed.feat_miss": (1, d),
        "embed.feat_type": (d,),
        "embed.target_val": (1, d),
        "embed.target_query": (1, d),
        "embed.target_type": (d,),
        "embed.prior_cell": (d,),
    }
    for i in range(cfg.n_layers):
        for axis in ("row", "col"):
            for w in ("wq", "wk", "wv", "wo"):
                spec[f"layer{i}.{axis}.{w}"] = (d, d)
            spec[f"layer{i}.{axis}_ln.g"] = (d,)
            spec[f"layer{i}.{axis}_ln.b"] = (d,)
        spec[f"layer{i}.mlp.w1"] = (d, h)
        spec[f"layer{i}.mlp.b1"] = (h,)
        spec[f"layer{i}.mlp.w2"] = (h, d)
        spec[f"layer{i}.mlp.b2"] = (d,)
        spec[f"layer{i}.mlp_ln.g"] = (d,)
        spec[f"layer{i}.mlp_ln.b"] = (d,)
    spec["head_ln.g"] = (d,)
    spec["head_ln.b"] = (d,)
    spec["head.w"] = (d, nb)
    spec["head.b"] = (nb,)
    return spec


def n_weights(cfg: ModelConfig) -> int:
    return sum(int(np.prod(s)) for s in param_spec(cfg).values())


def init_params(cfg: ModelConfig, rng: np.random.Generator,
                dtype=np.float32) -> dict[str, Tensor]:
    cfg.validate()
    d = cfg.embed_dim
    out_scale = 1.0 / math.sqrt(2.0 * cfg.n_layers)
    params: dict[str, Tensor] = {}
    for name, shape in param_spec(cfg).items():
        if name.endswith("_ln.g"):
            arr = np.ones(shape)
        elif name.endswith((".b1", ".b2", "_ln.b", "head.b")):
            arr = np.zeros(shape)
        elif name.startswith("embed."):
            arr = rng.normal(0.0, 1.0 / math.sqrt(d), size=shape)
        else:
            fan_in = shape[0] if len(shape) == 2 else shape[-1]
            arr = rng.normal(0.0, 1.0 / math.sqrt(fan_in), size=shape)
            if name.endswith((".wo", ".w2")):
                arr *= out_scale
        params[name] = Tensor(arr.astype(dtype))
    return params


def _standardize_features(task: Task) -> tuple[np.ndarray, np.ndarray]:
    """Mask-aware per-column standardization over train+test rows."""
    X = np.concatenate([task.X_train, task.X_test], axis=0)
    M = np.concatenate([task.m_train, task.m_test], axis=0)
    V = X.astype(np.float64).copy()
    for j in range(X.shape[1]):
        obs = ~M[:, j]
        if obs.sum() == 0:
            V[:, j] = 0.0
            continue
        mu = V[obs, j].mean()
        sd = V[obs, j].std()
        if sd < 1e-8:
            sd = 1.0
        V[:, j] = (V[:, j] - mu) / sd
    V[M] = 0.0
    return V, M.astype(np.float64)


def _attention(x: Tensor, wq, wk, wv, wo, n_heads: int,
               add_mask: np.ndarray | None = None) -> Tensor:
    B, L, D = x.shape
    dh = D // n_heads

    def split(t):
        return ad.transpose(ad.reshape(t, (B, L, n_heads, dh)), (0, 2, 1, 3))

    q = split(ad.matmul(x, wq))
    k = split(ad.matmul(x, wk))
    v = split(ad.matmul(x, wv))
    scores = ad.mul(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dh))
    if add_mask is not None:
        scores = ad.add(scores, Tensor(add_mask.astype(x.dtype)))
    attn = ad.softmax(scores, axis=-1)
    out = ad.reshape(ad.transpose(ad.matmul(attn, v), (0, 2, 1, 3)), (B, L, D))
    return ad.matmul(out, wo)


def _maybe_dropout(t: Tensor, rate: float, rng) -> Tensor:
    if rate <= 0.0 or rng is None:
        return t
    keep = (rng.random(size=t.shape) >= rate).astype(t.data.dtype)
    return ad.mul(t, keep / (1.0 - rate))


def forward(cfg: ModelConfig, params: dict[str, Tensor], task: Task,
            transform: tuple[float, float], dropout_rng=None) -> Tensor:
    """Bin logits (n_test, n_bins) for every test row of the task."""
    cfg.validate()
    n_rows = task.n_train + task.n_test
    if n_rows > cfg.max_rows:
        raise CapacityError(f"task has {n_rows} rows, checkpoint max_rows={cfg.max_rows}")
    if task.n_features > cfg.max_features:
        raise CapacityError(
            f"task has {task.n_features} features, checkpoint max_features={cfg.max_features}"
        )
    if task.n_train < 1:
        raise ContractError("need at least one training row")
    dtype = params["head.w"].dtype
    a, b = transform
    y_std = ((task.y_train - b) / a).astype(dtype)

    cols = []
    if task.n_features > 0:
        V, M = _standardize_features(task)
        vals = Tensor(V[:, :, None].astype(dtype))
        miss = Tensor(M[:, :, None].astype(dtype))
        feat = ad.add(
            ad.add(ad.matmul(vals, params["embed.feat_val"]),
                   ad.matmul(miss, params["embed.feat_miss"])),
            params["embed.feat_type"],
        )
        cols.append(feat)

    t_vals = np.zeros((n_rows, 1, 1), dtype=dtype)
    t_vals[: task.n_train, 0, 0] = y_std
    t_query = np.zeros((n_rows, 1, 1), dtype=dtype)
    t_query[task.n_train:, 0, 0] = 1.0
    target = ad.add(
        ad.add(ad.matmul(Tensor(t_vals), params["embed.target_val"]),
               ad.matmul(Tensor(t_query), params["embed.target_query"])),
        params["embed.target_type"],
    )
    cols.append(target)
    x = ad.concat(cols, axis=1) if len(cols) > 1 else cols[0]

    n_cols = task.n_features + 1
    target_col = n_cols - 1
    # learned prior row: one extra sample-axis slot per column. Attention
    # outputs are convex combinations of values, so without it the network
    # could not distinguish n identical context rows from one (the softmax
    # weight that falls on this cell decays as 1/(n+1), carrying the row
    # count the posterior needs).
    prior = ad.reshape(params["embed.prior_cell"], (1, 1, cfg.embed_dim))
    prior_row = ad.add(Tensor(np.zeros((1, n_cols, cfg.embed_dim), dtype=dtype)),
                       prior)
    x = ad.concat([x, prior_row], axis=0)

    # sample-axis attention mask: nobody may attend to test-row target cells
    col_mask = np.zeros((n_cols, 1, 1, n_rows + 1), dtype=np.float64)
    col_mask[target_col, 0, 0, task.n_train:n_rows] = ATTENTION_MASK

    p = params
    for i in range(cfg.n_layers):
        h = ad.layer_norm(x, p[f"layer{i}.row_ln.g"], p[f"layer{i}.row_ln.b"])
        h = _attention(h, p[f"layer{i}.row.wq"], p[f"layer{i}.row.wk"],
                       p[f"layer{i}.row.wv"], p[f"layer{i}.row.wo"], cfg.n_heads)
        x = ad.add(x, _maybe_dropout(h, cfg.dropout_rate, dropout_rng))

        h = ad.layer_norm(x, p[f"layer{i}.col_ln.g"], p[f"layer{i}.col_ln.b"])
        h = ad.transpose(h, (1, 0, 2))
        h = _attention(h, p[f"layer{i}.col.wq"], p[f"layer{i}.col.wk"],
                       p[f"layer{i}.col.wv"], p[f"layer{i}.col.wo"], cfg.n_heads,
                       add_mask=col_mask)
        h = ad.transpose(h, (1, 0, 2))
        x = ad.add(x, _maybe_dropout(h, cfg.dropout_rate, dropout_rng))

        h = ad.layer_norm(x, p[f"layer{i}.mlp_ln.g"], p[f"layer{i}.mlp_ln.b"])
        h = ad.gelu(ad.add(ad.matmul(h, p[f"layer{i}.mlp.w1"]), p[f"layer{i}.mlp.b1"]))
        h = ad.add(ad.matmul(h, p[f"layer{i}.mlp.w2"]), p[f"layer{i}.mlp.b2"])
        x = ad.add(x, _maybe_dropout(h, cfg.dropout_rate, dropout_rng))

    test_cells = x[slice(task.n_train, n_rows), target_col, slice(None)]
    h = ad.layer_norm(test_cells, p["head_ln.g"], p["head_ln.b"])
    logits = ad.add(ad.matmul(h, p["head.w"]), p["head.b"])
    return ad.assert_finite(logits, "forward logits")


def logits_to_distribution(logits: np.ndarray, bin_edges: np.ndarray,
                           transform: tuple[float, float],
                           tail_scale: float) -> PredictiveDistribution:
    """Softmax the logits of one test row into a bar distribution in target units."""
    logits = np.asarray(logits, dtype=np.float64).reshape(-1)
    bin_edges = np.asarray(bin_edges, dtype=np.float64)
    if len(bin_edges) != logits.size + 1:
        raise ContractError("need n_bins+1 edges")
    if not np.all(np.diff(bin_edges) > 0):
        raise ContractError("bin edges must be strictly increasing")
    z = logits - logits.max()
    e = np.exp(z)
    masses = e / e.sum()
    a, b = transform
    dist = PredictiveDistribution(edges=bin_edges, masses=masses,
                                  tail_lo=tail_scale, tail_hi=tail_scale)
    return dist.affine(a, b)


@dataclass
class Checkpoint:
    model_cfg: ModelConfig
    prior_cfg: PriorConfig
    bin_strategy: BinStrategy
    weights: dict[str, np.ndarray]  # float32, keyed by param_spec names

    def __post_init__(self):
        spec = param_spec(self.model_cfg)
        if set(self.weights) != set(spec):
            raise ContractError("weight names do not match the model config")
        for name, shape in spec.items():
            if tuple(self.weights[name].shape) != tuple(shape):
                raise ContractError(f"weight {name} has shape {self.weights[name].shape}, "
                                    f"expected {shape}")

    def params(self, dtype=np.float32) -> dict[str, Tensor]:
        return {k: Tensor(v.astype(dtype)) for k, v in self.weights.items()}

    def save(self, path: str | os.PathLike) -> None:
        blob = io.BytesIO()
        tensors = []
        for name in param_spec(self.model_cfg):
            arr = np.ascontiguousarray(self.weights[name], dtype="<f4")
            tensors.append({"name": name, "shape": list(arr.shape),
                            "offset": blob.tell(), "nbytes": arr.nbytes})
            blob.write(arr.tobytes())
        blob_bytes = blob.getvalue()
        meta = json.dumps({
            "model": asdict(self.model_cfg),
            "prior": json.loads(self.prior_cfg.to_json()),
            "bin_strategy": asdict(self.bin_strategy),
            "tensors": tensors,
            "blob_nbytes": len(blob_bytes),
        }, sort_keys=True).encode("utf-8")
        path = os.fspath(path)
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".",
                                   suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(MAGIC)
                f.write(struct.pack("<I", FORMAT_VERSION))
                f.write(struct.pack("<I", len(meta)))
                f.write(meta)
                f.write(blob_bytes)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Checkpoint":
        with open(path, "rb") as f:
            raw = f.read()
        if len(raw) < 12 or raw[:4] != MAGIC:
            raise NotACheckpointError(f"{path}: not a checkpoint (bad magic)")
        (version,) = struct.unpack_from("<I", raw, 4)
        if version != FORMAT_VERSION:
            raise VersionMismatchError(f"{path}: format version {version}, "
                                       f"expected {FORMAT_VERSION}")
        (meta_len,) = struct.unpack_from("<I", raw, 8)
        if len(raw) < 12 + meta_len:
            raise CorruptHeaderError(f"{path}: header shorter than declared")
        try:
            meta = json.loads(raw[12:12 + meta_len].decode("utf-8"))
            model_cfg = ModelConfig(**meta["model"])
            prior_cfg = PriorConfig.from_json(json.dumps(meta["prior"]))
            strategy = BinStrategy(**meta["bin_strategy"])
            tensors = meta["tensors"]
            blob_nbytes = meta["blob_nbytes"]
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptHeaderError(f"{path}: corrupt metadata ({exc})") from exc
        blob = raw[12 + meta_len:]
        if len(blob) < blob_nbytes:
            raise TruncatedBlobError(f"{path}: truncated blob "
                                     f"({len(blob)} of {blob_nbytes} bytes)")
        weights = {}
        for t in tensors:
            start, n = t["offset"], t["nbytes"]
            if start + n > len(blob):
                raise TruncatedBlobError(f"{path}: tensor {t['name']} out of range")
            arr = np.frombuffer(blob[start:start + n], dtype="<f4").reshape(t["shape"])
            weights[t["name"]] = arr.copy()
        return cls(model_cfg=model_cfg, prior_cfg=prior_cfg,
                   bin_strategy=strategy, weights=weights)
