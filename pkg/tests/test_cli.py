import hashlib
import json
import os

import pytest

from geopfn import cli
from geopfn.errors import ContractError

SITE_SYNTH = {"n_boreholes": 6, "records_per_borehole": [8, 10], "seed": 11,
              "missing_rate": [0.03, 0.03, 0.03, 0.05, 0.05, 0.03,
                               0.1, 0.4, 0.4, 0.4, 0.4]}
BID_SYNTH = {"n_boreholes": 5, "records_per_borehole": [8, 10], "seed": 12,
             "missing_rate": [0.0] * 11}
FAST_HBM = {"burn_in": 50, "kept_draws": 100}


def write_cfg(tmp_path, name, cfg):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def sha(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


def bench1_cfg(tmp_path, ckpt, **extra):
    cfg = {"checkpoint": ckpt, "out": str(tmp_path / "out"),
           "site": {"synth": SITE_SYNTH},
           "bids": [{"label": "Local-BID", "synth": BID_SYNTH}],
           "baseline": dict(FAST_HBM), "plots": False, "seed": 3}
    cfg.update(extra)
    return cfg


# ------------------------------------------------------------ config errors


def test_missing_config_file_exit_2_names_path(capsys):
    rc = cli.main(["synth", "--config", "/nope/missing.json"])
    assert rc == 2
    assert "/nope/missing.json" in capsys.readouterr().err


def test_config_not_json_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert cli.main(["synth", "--config", str(p)]) == 2
    assert "not valid JSON" in capsys.readouterr().err


def test_manifest_subcommand_mismatch_exit_2(tmp_path, capsys):
    p = write_cfg(tmp_path, "m.json", {"subcommand": "synth", "config": {}})
    assert cli.main(["bench1", "--config", str(p)]) == 2
    assert "synth" in capsys.readouterr().err


def test_missing_checkpoint_flag_exit_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "c.json", {"out": str(tmp_path),
                                         "site": {"synth": SITE_SYNTH}})
    assert cli.main(["bench1", "--config", cfg]) == 2
    assert "checkpoint" in capsys.readouterr().err


def test_unreadable_checkpoint_exit_2(tmp_path, capsys):
    cfg = bench1_cfg(tmp_path, str(tmp_path / "no.ckpt"))
    assert cli.main(["bench1", "--config", write_cfg(tmp_path, "c.json", cfg)]) == 2
    assert "no.ckpt" in capsys.readouterr().err


def test_corrupt_checkpoint_exit_3(tmp_path, capsys):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"not a checkpoint at all")
    cfg = bench1_cfg(tmp_path, str(bad))
    assert cli.main(["bench1", "--config", write_cfg(tmp_path, "c.json", cfg)]) == 3


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2


def test_report_without_metrics_json_exit_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "r.json", {"out": str(tmp_path)})
    assert cli.main(["report", "--config", cfg]) == 2
    assert "metrics_json" in capsys.readouterr().err


# ----------------------------------------------------------------- workers


def test_n_workers_default_and_env(monkeypatch):
    monkeypatch.delenv("PFN_SITE_THREADS", raising=False)
    assert cli.n_workers() == 1
    monkeypatch.setenv("PFN_SITE_THREADS", "4")
    assert cli.n_workers() == 4


def test_invalid_thread_env_exit_2(tmp_path, monkeypatch, capsys, tiny_ckpt_path):
    monkeypatch.setenv("PFN_SITE_THREADS", "many")
    cfg = bench1_cfg(tmp_path, tiny_ckpt_path, scenarios=["individual"],
                     baseline={"enabled": False})
    assert cli.main(["bench1", "--config", write_cfg(tmp_path, "c.json", cfg)]) == 2
    assert "PFN_SITE_THREADS" in capsys.readouterr().err
    monkeypatch.setenv("PFN_SITE_THREADS", "0")
    with pytest.raises(ContractError):
        cli.n_workers()


def test_map_preserves_order(monkeypatch):
    monkeypatch.setenv("PFN_SITE_THREADS", "3")
    assert cli._map(lambda x: x * x, list(range(20))) == [x * x for x in range(20)]


# ------------------------------------------------------------------- synth


def test_synth_seed_determinism(tmp_path, capsys):
    base = {"site": {"n_boreholes": 3, "seed": 0}}
    for d in ("a", "b"):
        cfg = dict(base, out=str(tmp_path / d))
        assert cli.main(["synth", "--config", write_cfg(tmp_path, f"{d}.json", cfg),
                         "--seed", "7"]) == 0
    assert sha(tmp_path / "a" / "site.csv") == sha(tmp_path / "b" / "site.csv")


def test_synth_flag_overrides_config_seed(tmp_path):
    cfg = {"site": {"n_boreholes": 3, "seed": 0}, "out": str(tmp_path / "o")}
    cli.main(["synth", "--config", write_cfg(tmp_path, "c.json", cfg),
              "--seed", "9"])
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["config"]["site"]["seed"] == 9


# ----------------------------------------------------------------- pretrain


def test_pretrain_writes_checkpoint_and_log_deterministically(tmp_path, capsys):
    cfg = {"prior": {"family": "scm", "max_features": 4, "max_rows": 20,
                     "seed": 5},
           "model": {"embed_dim": 16, "n_layers": 1, "n_heads": 2,
                     "mlp_hidden": 32, "n_bins": 8, "max_features": 8,
                     "max_rows": 64},
           "train": {"steps": 3, "tasks_per_step": 2, "warmup_steps": 1,
                     "val_tasks": 2, "val_every": 3, "seed": 5}}
    hashes = []
    for d in ("a", "b"):
        run = dict(cfg, out=str(tmp_path / d))
        assert cli.main(["pretrain", "--config",
                         write_cfg(tmp_path, f"{d}.json", run)]) == 0
        assert os.path.exists(tmp_path / d / "train_log.ndjson")
        hashes.append(sha(tmp_path / d / "model.ckpt"))
    assert hashes[0] == hashes[1]
    assert "val_nll" in capsys.readouterr().out


# ------------------------------------------------------------------ drivers


def test_bench1_end_to_end_and_replay(tmp_path, tiny_ckpt_path, capsys):
    cfg = bench1_cfg(tmp_path, tiny_ckpt_path)
    assert cli.main(["bench1", "--config", write_cfg(tmp_path, "c.json", cfg)]) == 0
    out = tmp_path / "out"
    for name in ("metrics.csv", "metrics.json", "predictions.csv",
                 "runtime_table.txt", "manifest.json"):
        assert (out / name).exists(), name
    first = {n: sha(out / n) for n in ("metrics.csv", "predictions.csv")}
    # replaying the manifest into a fresh directory reproduces the CSVs
    manifest = json.loads((out / "manifest.json").read_text())
    manifest["config"]["out"] = str(tmp_path / "replay")
    replay = write_cfg(tmp_path, "replay.json", manifest)
    assert cli.main(["bench1", "--config", replay]) == 0
    for n, h in first.items():
        assert sha(tmp_path / "replay" / n) == h, n


def test_bench1_unknown_bid_label_exit_2(tmp_path, tiny_ckpt_path, capsys):
    cfg = bench1_cfg(tmp_path, tiny_ckpt_path)
    assert cli.main(["bench1", "--config", write_cfg(tmp_path, "c.json", cfg),
                     "--bid", "Other"]) == 2
    assert "Other" in capsys.readouterr().err


def test_bench1_capacity_exit_4(tmp_path, tiny_ckpt_path, capsys):
    # tiny model caps at 400 rows; forcing a larger context must exit 4
    big_bid = dict(BID_SYNTH, n_boreholes=40, records_per_borehole=[14, 16])
    cfg = bench1_cfg(tmp_path, tiny_ckpt_path, max_rows=900,
                     bids=[{"label": "Big", "synth": big_bid}],
                     baseline={"enabled": False}, scenarios=["individual"])
    assert cli.main(["bench1", "--config", write_cfg(tmp_path, "c.json", cfg)]) == 4


def test_impute_fully_observed_exit_3(tmp_path, tiny_ckpt_path, capsys):
    cfg = {"checkpoint": tiny_ckpt_path, "out": str(tmp_path / "o"),
           "bid_table": {"synth": BID_SYNTH},
           "problem": {"synth": dict(BID_SYNTH, seed=13)}}
    assert cli.main(["impute", "--config", write_cfg(tmp_path, "c.json", cfg)]) == 3
    assert "nothing to impute" in capsys.readouterr().err


def test_impute_emits_value_per_missing_cell(tmp_path, tiny_ckpt_path, capsys):
    problem = dict(SITE_SYNTH, n_boreholes=3, records_per_borehole=[4, 5],
                   seed=14,
                   missing_rate=[0.0] * 6 + [0.5] + [0.0] * 4)
    cfg = {"checkpoint": tiny_ckpt_path, "out": str(tmp_path / "o"),
           "bid_table": {"synth": BID_SYNTH}, "problem": {"synth": problem}}
    assert cli.main(["impute", "--config", write_cfg(tmp_path, "c.json", cfg)]) == 0
    lines = (tmp_path / "o" / "imputed.csv").read_text().splitlines()
    assert lines[0] == "site_id,borehole_id,depth,parameter,mean,q025,q500,q975"
    assert all(line.split(",")[3] == "su" for line in lines[1:])
    assert len(lines) > 1


def test_report_rerenders_metrics(tmp_path, tiny_ckpt_path, capsys):
    cfg = bench1_cfg(tmp_path, tiny_ckpt_path, baseline={"enabled": False},
                     scenarios=["individual"])
    assert cli.main(["bench1", "--config", write_cfg(tmp_path, "c.json", cfg)]) == 0
    out = tmp_path / "out"
    rep_cfg = {"metrics_json": str(out / "metrics.json"),
               "out": str(tmp_path / "rep"), "plots": False}
    assert cli.main(["report", "--config", write_cfg(tmp_path, "r.json", rep_cfg)]) == 0
    assert sha(tmp_path / "rep" / "metrics.csv") == sha(out / "metrics.csv")
