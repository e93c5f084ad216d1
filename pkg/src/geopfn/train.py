"""Meta-training of the PFN on streams of synthetic tasks.

One step samples ``tasks_per_step`` tasks, accumulates the negative
log-likelihood of true test targets under the piecewise-constant predictive,
clips the global gradient norm, and applies a bias-corrected adaptive-moment
update under a warmup + cosine learning-rate schedule. Everything is a pure
function of (seed, configs): task seeds are derived from the training seed,
and reductions run in sorted task order.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import GradTape, Tensor
from .bardist import bin_index, log_density_constants
from .errors import ContractError, TrainingError
from .model import (
    BinStrategy,
    Checkpoint,
    ModelConfig,
    edges_for_task,
    forward,
    init_params,
    target_transform,
)
from .prior import PriorConfig, sample_task


@dataclass
class TrainConfig:
    steps: int = 1000
    tasks_per_step: int = 8
    lr_peak: float = 3e-4
    warmup_steps: int = 100
    lr_min_frac: float = 0.05
    clip_norm: float = 1.0
    seed: int = 0
    checkpoint_every: int = 0  # 0 = final checkpoint only
    val_tasks: int = 64
    val_every: int = 100

    def validate(self) -> None:
        if self.steps < 1:
            raise ContractError("steps must be >= 1")
        if self.lr_peak <= 0:
            raise ContractError("peak learning rate must be positive")
        if self.clip_norm <= 0:
            raise ContractError("clip norm must be positive")
        if self.tasks_per_step < 1 or self.val_tasks < 0:
            raise ContractError("task counts must be positive")


def loss(logits: Tensor, y_test_standardized: np.ndarray, bin_edges: np.ndarray,
         tail_scale: float = 1.0) -> Tensor:
    """Mean over test rows of -log(predictive density at the true target)."""
    y = np.asarray(y_test_standardized, dtype=np.float64)
    if logits.shape[0] != y.size:
        raise ContractError("one logit row per test target required")
    ls = ad.log_softmax(logits, axis=-1)
    idx = bin_index(bin_edges, y)
    geom = log_density_constants(bin_edges, y, tail_scale)
    picked = ls[(np.arange(y.size), idx)]
    return ad.mul(ad.tsum(ad.add(picked, geom.astype(ls.dtype))), -1.0 / y.size)


def lr_at(cfg: TrainConfig, step: int) -> float:
    """Learning rate for 1-indexed step: linear warmup then cosine decay."""
    if cfg.warmup_steps > 0 and step <= cfg.warmup_steps:
        return cfg.lr_peak * step / cfg.warmup_steps
    span = max(1, cfg.steps - cfg.warmup_steps)
    t = min(1.0, (step - cfg.warmup_steps) / span)
    floor = cfg.lr_peak * cfg.lr_min_frac
    return floor + 0.5 * (cfg.lr_peak - floor) * (1.0 + math.cos(math.pi * t))


def clip_global_norm(grads: list[np.ndarray], max_norm: float) -> tuple[list[np.ndarray], float]:
    total = math.sqrt(sum(float((g * g).sum()) for g in grads))
    if total <= max_norm or total == 0.0:
        return grads, total
    scale = max_norm / total
    return [g * scale for g in grads], total


class Adam:
    """First-order adaptive-moment optimizer with bias correction."""

    def __init__(self, names: list[str], params: dict[str, Tensor],
                 beta1=0.9, beta2=0.999, eps=1e-8):
        self.names = names
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {n: np.zeros_like(params[n].data) for n in names}
        self.v = {n: np.zeros_like(params[n].data) for n in names}
        self.t = 0

    def step(self, params: dict[str, Tensor], grads: list[np.ndarray], lr: float) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for name, g in zip(self.names, grads):
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / b1c) / (np.sqrt(v / b2c) + self.eps)
            params[name].data = params[name].data - (lr * update).astype(params[name].dtype)


def _task_seed(seed: int, stream: int, step: int, i: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, stream, step, i)))


def default_bin_strategy(prior_cfg: PriorConfig) -> BinStrategy:
    if prior_cfg.family == "conjugate":
        # conjugate tasks carry absolute location information, so the target
        # transform must be the identity and the bins fixed
        bound = 6.0 * math.sqrt(prior_cfg.conj_tau0_sq + prior_cfg.conj_sigma_sq)
        return BinStrategy(mode="fixed_uniform", bound=bound, tail_scale=1.0)
    return BinStrategy(mode="per_task_equal_mass", bound=4.0, tail_scale=1.0)


def _task_nll(model_cfg, params, task, strategy) -> Tensor:
    a, b = target_transform(strategy, task.y_train)
    edges = edges_for_task(strategy, model_cfg.n_bins, (task.y_train - b) / a)
    logits = forward(model_cfg, params, task, (a, b))
    return loss(logits, (task.y_test - b) / a, edges, strategy.tail_scale)


def validation_nll(model_cfg, params, tasks, strategy) -> float:
    vals = [_task_nll(model_cfg, params, t, strategy).item() for t in tasks]
    return float(np.mean(vals))


def train(prior_cfg: PriorConfig, model_cfg: ModelConfig, train_cfg: TrainConfig,
          bin_strategy: BinStrategy | None = None, log_path=None,
          checkpoint_path=None, progress: bool = False) -> tuple[Checkpoint, list[dict]]:
    """Meta-train a fresh model; returns (checkpoint, training log records)."""
    prior_cfg.validate()
    model_cfg.validate()
    train_cfg.validate()
    strategy = bin_strategy or default_bin_strategy(prior_cfg)
    strategy.validate()

    params = init_params(model_cfg, np.random.default_rng(
        np.random.SeedSequence((train_cfg.seed, 2))))
    names = sorted(params)
    optimizer = Adam(names, params)

    val_tasks = [sample_task(prior_cfg, _task_seed(train_cfg.seed, 0, 0, j))
                 for j in range(train_cfg.val_tasks)]

    records: list[dict] = []
    header = {
        "header": True,
        "total_tasks": train_cfg.steps * train_cfg.tasks_per_step,
        "note": ("desk-scale pre-training budget of "
                 f"{train_cfg.steps * train_cfg.tasks_per_step} synthetic tasks"),
        "prior": json.loads(prior_cfg.to_json()),
        "seed": train_cfg.seed,
    }
    records.append(header)
    log_file = open(log_path, "w") if log_path else None
    if log_file:
        log_file.write(json.dumps(header, sort_keys=True) + "\n")

    def make_checkpoint() -> Checkpoint:
        return Checkpoint(model_cfg=model_cfg, prior_cfg=prior_cfg,
                          bin_strategy=strategy,
                          weights={n: params[n].data.astype(np.float32) for n in names})

    t0 = time.perf_counter()
    try:
        for step in range(1, train_cfg.steps + 1):
            grad_sum = [np.zeros_like(params[n].data) for n in names]
            train_nll = 0.0
            for i in range(train_cfg.tasks_per_step):
                task = sample_task(prior_cfg, _task_seed(train_cfg.seed, 1, step, i))
                task_loss = _task_nll(model_cfg, params, task, strategy)
                value = task_loss.item()
                if not math.isfinite(value):
                    raise TrainingError(
                        f"non-finite loss at step {step}, task seed "
                        f"({train_cfg.seed}, 1, {step}, {i})")
                train_nll += value
                for acc, g in zip(grad_sum, GradTape(task_loss).backward(
                        [params[n] for n in names])):
                    acc += g
            grads = [g / train_cfg.tasks_per_step for g in grad_sum]
            grads, _ = clip_global_norm(grads, train_cfg.clip_norm)
            optimizer.step(params, grads, lr_at(train_cfg, step))

            log_now = (step == 1 or step == train_cfg.steps
                       or (train_cfg.val_every > 0 and step % train_cfg.val_every == 0))
            if log_now:
                val = (validation_nll(model_cfg, params, val_tasks, strategy)
                       if val_tasks else None)
                rec = {"step": step,
                       "train_nll": train_nll / train_cfg.tasks_per_step,
                       "val_nll": val,
                       "wallclock_s": time.perf_counter() - t0}
                records.append(rec)
                if log_file:
                    log_file.write(json.dumps(rec, sort_keys=True) + "\n")
                    log_file.flush()
                if progress:
                    print(f"step {step}/{train_cfg.steps} "
                          f"train_nll={rec['train_nll']:.4f} val_nll={val}")
            if (checkpoint_path and train_cfg.checkpoint_every > 0
                    and step % train_cfg.checkpoint_every == 0):
                make_checkpoint().save(checkpoint_path)
    finally:
        if log_file:
            log_file.close()

    ckpt = make_checkpoint()
    if checkpoint_path:
        ckpt.save(checkpoint_path)
    return ckpt, records
