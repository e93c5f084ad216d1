"""Trained checkpoints shared across the test suite.

Training a PFN takes minutes, so the suite trains each configuration once
and caches the checkpoint under tests/_cache keyed by a hash of the full
(prior, model, train) configuration. Delete the cache directory to force
retraining. Run this file directly to pre-build both checkpoints.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict

from geopfn.model import Checkpoint, ModelConfig
from geopfn.prior import PriorConfig
from geopfn.train import TrainConfig, train

CACHE_DIR = os.path.join(os.path.dirname(__file__), "_cache")


def conjugate_configs():
    prior = PriorConfig(family="conjugate", seed=101, conj_mu0=0.0,
                        conj_tau0_sq=1.0, conj_sigma_sq=1.0,
                        conj_train_rows=(1, 30), conj_test_rows=(1, 4))
    model = ModelConfig(embed_dim=32, n_layers=2, n_heads=4, mlp_hidden=64,
                        n_bins=64, max_features=16, max_rows=1024)
    tc = TrainConfig(steps=4000, tasks_per_step=8, lr_peak=3e-4,
                     warmup_steps=200, seed=101, val_tasks=32, val_every=500)
    return prior, model, tc


def scm_configs():
    prior = PriorConfig(family="scm", max_features=6, max_rows=60, seed=202)
    model = ModelConfig(embed_dim=32, n_layers=3, n_heads=4, mlp_hidden=64,
                        n_bins=48, max_features=16, max_rows=1024)
    tc = TrainConfig(steps=4500, tasks_per_step=8, lr_peak=3e-4,
                     warmup_steps=200, seed=202, val_tasks=32, val_every=500)
    return prior, model, tc


def tiny_configs():
    """Throwaway checkpoint for CLI/driver plumbing tests; barely trained."""
    prior = PriorConfig(family="scm", max_features=6, max_rows=40, seed=303)
    model = ModelConfig(embed_dim=16, n_layers=2, n_heads=2, mlp_hidden=32,
                        n_bins=16, max_features=16, max_rows=400)
    tc = TrainConfig(steps=30, tasks_per_step=4, warmup_steps=5, seed=303,
                     val_tasks=4, val_every=30)
    return prior, model, tc


CONFIGS = {"conjugate": conjugate_configs, "scm": scm_configs,
           "tiny": tiny_configs}


def _cache_path(tag: str, prior, model, tc) -> str:
    from geopfn.model import param_spec

    # param names key the hash too, so architecture changes invalidate caches
    blob = json.dumps([json.loads(prior.to_json()), asdict(model), asdict(tc),
                       sorted(param_spec(model))], sort_keys=True)
    h = hashlib.sha256(blob.encode()).hexdigest()[:12]
    return os.path.join(CACHE_DIR, f"{tag}_{h}.ckpt")


def get_checkpoint_path(tag: str) -> str:
    prior, model, tc = CONFIGS[tag]()
    path = _cache_path(tag, prior, model, tc)
    if not os.path.exists(path):
        os.makedirs(CACHE_DIR, exist_ok=True)
        train(prior, model, tc, checkpoint_path=path)
    return path


def get_checkpoint(tag: str) -> Checkpoint:
    return Checkpoint.load(get_checkpoint_path(tag))


if __name__ == "__main__":
    for tag in ("conjugate", "scm"):
        ckpt = get_checkpoint(tag)
        print(f"{tag}: {sum(w.size for w in ckpt.weights.values())} weights ready")
