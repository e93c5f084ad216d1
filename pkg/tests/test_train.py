import json
import math

import numpy as np
import pytest

from geopfn.autodiff import Tensor
from geopfn.errors import ContractError
from geopfn.model import BinStrategy, ModelConfig, init_params
from geopfn.prior import PriorConfig, conjugate_posterior_predictive, sample_task
from geopfn.train import (
    Adam,
    TrainConfig,
    clip_global_norm,
    default_bin_strategy,
    loss,
    lr_at,
    train,
    validation_nll,
)

TINY_MODEL = ModelConfig(embed_dim=16, n_layers=1, n_heads=2, mlp_hidden=32,
                         n_bins=8, max_features=8, max_rows=64)
TINY_PRIOR = PriorConfig(family="scm", max_features=3, max_rows=12, min_rows=6,
                         seed=0)


# -------------------------------------------------------------------- loss


def test_loss_mass_half_width_half_is_zero():
    # 0.5 mass on an interior bin of width 0.5 -> density 1 -> NLL 0
    edges = np.array([0.0, 0.25, 0.75, 1.25])
    logits = Tensor(np.array([[0.0, math.log(2.0), 0.0]]), dtype=np.float64)
    nll = loss(logits, np.array([0.5]), edges, 1.0)
    assert nll.item() == pytest.approx(0.0, abs=1e-12)


def test_loss_uniform_unit_bin_is_zero():
    # all mass concentrated (logit +40) in a unit-width interior bin -> NLL ~ 0
    edges = np.array([-1.0, 0.0, 1.0, 2.0])
    logits = Tensor(np.array([[0.0, 40.0, 0.0]]), dtype=np.float64)
    nll = loss(logits, np.array([0.5]), edges, 1.0)
    assert nll.item() == pytest.approx(0.0, abs=1e-6)


def test_loss_vs_direct_density_oracle():
    from geopfn.bardist import PredictiveDistribution

    rng = np.random.default_rng(14)
    edges = np.sort(rng.uniform(-3, 3, size=9))
    edges += np.arange(9) * 1e-3
    logits_np = rng.normal(size=(3, 8))
    y = rng.uniform(-2, 2, size=3)
    nll = loss(Tensor(logits_np, dtype=np.float64), y, edges, 1.0).item()
    want = 0.0
    for row, yi in zip(logits_np, y):
        m = np.exp(row - row.max())
        m /= m.sum()
        d = PredictiveDistribution(edges=edges, masses=m, tail_lo=1.0, tail_hi=1.0)
        want -= d.log_density(yi)
    assert nll == pytest.approx(want / 3, rel=1e-9)


def test_loss_rejects_length_mismatch():
    with pytest.raises(ContractError):
        loss(Tensor(np.zeros((2, 8))), np.zeros(3), np.linspace(-1, 1, 9), 1.0)


# ---------------------------------------------------------------- schedule


def test_lr_warmup_and_floor():
    cfg = TrainConfig(steps=100, warmup_steps=10, lr_peak=1e-3, lr_min_frac=0.1)
    assert lr_at(cfg, 1) == pytest.approx(1e-4)
    assert lr_at(cfg, 10) == pytest.approx(1e-3)
    assert lr_at(cfg, 100) == pytest.approx(1e-4, rel=1e-6)  # cosine floor
    mid = lr_at(cfg, 55)
    assert 1e-4 < mid < 1e-3


def test_clip_global_norm():
    grads = [np.array([3.0]), np.array([4.0])]
    clipped, total = clip_global_norm(grads, 1.0)
    assert total == pytest.approx(5.0)
    assert math.sqrt(sum(float(g @ g) for g in clipped)) == pytest.approx(1.0)
    same, total = clip_global_norm(grads, 10.0)
    assert same[0] is grads[0]


def test_adam_zero_lr_leaves_weights_unchanged():
    params = {"w": Tensor(np.array([1.0, 2.0]), dtype=np.float64)}
    before = params["w"].data.copy()
    opt = Adam(["w"], params)
    opt.step(params, [np.array([0.5, -0.5])], lr=0.0)
    assert np.array_equal(params["w"].data, before)


def test_default_bin_strategy_per_family():
    scm = default_bin_strategy(PriorConfig(family="scm"))
    assert scm.mode == "per_task_equal_mass"
    conj = default_bin_strategy(PriorConfig(family="conjugate",
                                            conj_tau0_sq=1.0, conj_sigma_sq=1.0))
    assert conj.mode == "fixed_uniform"
    assert conj.bound == pytest.approx(6.0 * math.sqrt(2.0))


# ------------------------------------------------------------------- train


def test_train_deterministic_single_step():
    tc = TrainConfig(steps=1, tasks_per_step=2, warmup_steps=1, val_tasks=0,
                     seed=5)
    ck1, _ = train(TINY_PRIOR, TINY_MODEL, tc)
    ck2, _ = train(TINY_PRIOR, TINY_MODEL, tc)
    for name in ck1.weights:
        assert np.array_equal(ck1.weights[name], ck2.weights[name])


def test_train_log_header_states_task_budget(tmp_path):
    tc = TrainConfig(steps=2, tasks_per_step=3, warmup_steps=1, val_tasks=2,
                     val_every=2, seed=5)
    log = tmp_path / "log.ndjson"
    _, records = train(TINY_PRIOR, TINY_MODEL, tc, log_path=log)
    header = records[0]
    assert header["header"] is True
    assert header["total_tasks"] == 6
    assert "pre-training budget" in header["note"]
    lines = [json.loads(s) for s in log.read_text().splitlines()]
    assert lines[0]["total_tasks"] == 6
    assert lines[-1]["step"] == 2
    assert np.isfinite(lines[-1]["val_nll"])


def test_train_reduces_validation_nll():
    tc = TrainConfig(steps=200, tasks_per_step=4, warmup_steps=20, val_tasks=16,
                     val_every=100, seed=6)
    _, records = train(TINY_PRIOR, TINY_MODEL, tc)
    first = records[1]["val_nll"]
    last = records[-1]["val_nll"]
    assert last < first


def test_conjugate_validation_nll_near_analytic(conj_ckpt):
    """Validation NLL of the trained conjugate checkpoint stays within 0.05
    nats of the analytic posterior-predictive NLL on the same tasks."""
    cfg = conj_ckpt.prior_cfg
    tasks = [sample_task(cfg, np.random.default_rng(50_000 + s))
             for s in range(100)]
    got = validation_nll(conj_ckpt.model_cfg, conj_ckpt.params(np.float64),
                         tasks, conj_ckpt.bin_strategy)
    analytic = 0.0
    for t in tasks:
        mu, var = conjugate_posterior_predictive(
            cfg.conj_mu0, cfg.conj_tau0_sq, cfg.conj_sigma_sq, t.y_train)
        nll = 0.5 * np.log(2 * np.pi * var) + (t.y_test - mu) ** 2 / (2 * var)
        analytic += float(np.mean(nll))
    analytic /= len(tasks)
    assert abs(got - analytic) < 0.05


def test_bin_strategy_validation():
    with pytest.raises(ContractError):
        BinStrategy(mode="adaptive").validate()
    with pytest.raises(ContractError):
        TrainConfig(steps=0).validate()
