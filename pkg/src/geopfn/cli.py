"""Command-line entry point.

Subcommands: pretrain, synth, bench1, bench2, impute, report. Every run
resolves its configuration (JSON file + flag overrides, flags win), writes a
manifest.json capturing the resolved config into the output directory, and
can be replayed bit-identically (metric/prediction files, not wall-clock
logs) with `--config <out>/manifest.json`.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 capacity error. PFN_SITE_THREADS caps the prediction worker count.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import os
import sys

import numpy as np

from . import baseline, evaluate, plots
from .context import (
    ContextSpec,
    build_imputation,
    build_individual,
    build_simultaneous,
    detect_patterns,
    engineer_patterns,
    view_features,
    withhold_target,
)
from .errors import (
    CapacityError,
    ContextError,
    ContractError,
    DataError,
    GeopfnError,
    PriorError,
)
from .geodata import SiteTable, SynthSiteConfig, generate_site, load_csv, write_csv
from .infer import predict
from .model import BinStrategy, Checkpoint, ModelConfig
from .prior import PriorConfig
from .train import TrainConfig, default_bin_strategy, train

DEFAULT_PATTERNS = [
    {"missing": ["su", "Eu"], "n_records": 5},
    {"missing": ["su", "Eu", "sigma_p"], "n_records": 4},
    {"missing": ["Eu", "sigma_p", "Cc", "cv"], "n_records": 4},
    {"missing": ["su", "Eu", "sigma_p", "Cc", "cv"], "n_records": 3},
]


def n_workers() -> int:
    raw = os.environ.get("PFN_SITE_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ContractError(f"PFN_SITE_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise ContractError("PFN_SITE_THREADS must be >= 1")
    return n


def _map(fn, items: list) -> list:
    """Order-preserving map, threaded when PFN_SITE_THREADS > 1."""
    workers = n_workers()
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _load_config(path, subcommand: str) -> dict:
    try:
        with open(path) as f:
            cfg = json.load(f)
    except OSError as exc:
        raise ConfigUsageError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigUsageError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigUsageError(f"config {path} must hold a JSON object")
    if "subcommand" in cfg and "config" in cfg:  # replaying a manifest
        if cfg["subcommand"] != subcommand:
            raise ConfigUsageError(
                f"manifest {path} was written by {cfg['subcommand']!r}, "
                f"not {subcommand!r}")
        cfg = cfg["config"]
    return cfg


class ConfigUsageError(GeopfnError):
    """Bad command line or config file (exit code 2)."""


def _write_manifest(out_dir, subcommand: str, cfg: dict, extra: dict | None = None) -> str:
    os.makedirs(out_dir, exist_ok=True)
    doc = {"subcommand": subcommand, "config": cfg}
    if extra:
        doc.update(extra)
    path = os.path.join(out_dir, "manifest.json")
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    os.replace(tmp, path)
    return path


def _qualify(table: SiteTable, label: str | None = None) -> SiteTable:
    """Prefix borehole ids with the site id so ids never collide across
    sites (the baseline and the categorical vocab key on borehole_id)."""
    rows = [dataclasses.replace(r, borehole_id=f"{r.site_id}:{r.borehole_id}")
            if ":" not in r.borehole_id else r
            for r in table]
    return SiteTable(rows, label=label if label is not None else table.label)


def _table_from_cfg(entry: dict, what: str, default_label: str = "") -> SiteTable:
    if "csv" in entry:
        return load_csv(entry["csv"], label=entry.get("label") or None)
    if "synth" in entry:
        table = generate_site(SynthSiteConfig.from_dict(entry["synth"]))
        if entry.get("label"):
            table = SiteTable(list(table.records), label=entry["label"])
        return table
    raise ConfigUsageError(f"{what} entry needs either a 'csv' or a 'synth' key")


def _load_checkpoint(cfg: dict) -> Checkpoint:
    path = cfg.get("checkpoint")
    if not path:
        raise ConfigUsageError("a checkpoint path is required (--checkpoint)")
    try:
        return Checkpoint.load(path)
    except OSError as exc:
        raise ConfigUsageError(f"cannot read checkpoint {path}: {exc}")


def _hbm_spec(cfg: dict, seed: int) -> baseline.HBMSpec:
    raw = dict(cfg.get("baseline", {}))
    raw.pop("enabled", None)
    raw.setdefault("seed", seed)
    if "trend_prior_mean" in raw:
        raw["trend_prior_mean"] = tuple(raw["trend_prior_mean"])
    return baseline.HBMSpec(**raw)


# ---------------------------------------------------------------- pretrain


def cmd_pretrain(cfg: dict) -> int:
    out = cfg.get("out", ".")
    os.makedirs(out, exist_ok=True)
    prior_cfg = PriorConfig.from_json(json.dumps(cfg.get("prior", {})))
    model_cfg = ModelConfig(**cfg.get("model", {}))
    train_cfg = TrainConfig(**cfg.get("train", {}))
    if "seed" in cfg:
        train_cfg.seed = int(cfg["seed"])
    strategy = (BinStrategy(**cfg["bin_strategy"]) if "bin_strategy" in cfg
                else default_bin_strategy(prior_cfg))
    ckpt_path = cfg.get("checkpoint") or os.path.join(out, "model.ckpt")
    log_path = cfg.get("log") or os.path.join(out, "train_log.ndjson")
    _write_manifest(out, "pretrain", cfg)
    ckpt, records = train(prior_cfg, model_cfg, train_cfg, bin_strategy=strategy,
                          log_path=log_path, checkpoint_path=ckpt_path,
                          progress=bool(cfg.get("progress", False)))
    final = records[-1]
    print(f"checkpoint written to {ckpt_path}")
    print(f"final step {final['step']}: train_nll={final['train_nll']:.4f} "
          f"val_nll={final['val_nll']:.4f}")
    return 0


# ------------------------------------------------------------------- synth


def cmd_synth(cfg: dict) -> int:
    out = cfg.get("out", ".")
    os.makedirs(out, exist_ok=True)
    site_cfg = SynthSiteConfig.from_dict(cfg.get("site", {}))
    if "seed" in cfg:
        site_cfg.seed = int(cfg["seed"])
        cfg.setdefault("site", {})["seed"] = site_cfg.seed
    table = generate_site(site_cfg)
    path = os.path.join(out, cfg.get("filename", "site.csv"))
    write_csv(table, path)
    _write_manifest(out, "synth", cfg)
    print(f"{path}: {len(table)} records, {len(table.borehole_ids())} boreholes")
    return 0


# ------------------------------------------------------------------ bench1


def _predict_rows(ckpt, ctask, truth, report_label, group_of):
    """Predictions + the joined per-row table; only rows with known truth
    count toward metrics."""
    preds, secs = evaluate.timeit(report_label, lambda: predict(ckpt, ctask.task))
    rows, scored = [], {}
    for p, key in zip(preds, ctask.test_keys):
        site_id, bh_id, depth = key
        t = truth.get(key)
        row = {"report": report_label, "group": group_of(key), "site_id": site_id,
               "borehole_id": bh_id, "depth": repr(depth),
               "mean": repr(p.mean), "q025": repr(p.q025),
               "q500": repr(p.q500), "q975": repr(p.q975)}
        if t is not None:
            row["truth"] = repr(t)
            row["covered"] = int(p.q025 <= t <= p.q975)
            scored.setdefault(group_of(key), []).append((p, t))
        rows.append(row)
    return preds, rows, scored, secs


def _scored_to_groups(scored: dict) -> list:
    return [evaluate.group_metrics(g, [p for p, _ in pairs], [t for _, t in pairs])
            for g, pairs in sorted(scored.items())]


def cmd_bench1(cfg: dict) -> int:
    out = cfg.get("out", ".")
    os.makedirs(out, exist_ok=True)
    seed = int(cfg.get("seed", 0))
    target = cfg.get("target", "su")
    view = str(cfg.get("view", "4"))
    ckpt = _load_checkpoint(cfg)
    max_rows = int(cfg.get("max_rows", ckpt.model_cfg.max_rows))

    site_full = _qualify(_table_from_cfg(cfg.get("site", {}), "site"))
    boreholes = cfg.get("boreholes") or site_full.borehole_ids()[:5]
    if len(boreholes) < 2:
        raise ConfigUsageError("bench1 needs >= 2 target boreholes")
    site, truth = withhold_target(site_full, boreholes, target,
                                  float(cfg.get("withhold_fraction", 0.5)), seed)

    bids_cfg = cfg.get("bids") or [{"label": "Local-BID", "synth": {}}]
    if cfg.get("bid"):
        bids_cfg = [b for b in bids_cfg if b.get("label") == cfg["bid"]]
        if not bids_cfg:
            raise ConfigUsageError(f"no BID labelled {cfg['bid']!r} in the config")
    scenarios = cfg.get("scenarios", ["individual", "simultaneous"])
    if cfg.get("scenario"):
        scenarios = [cfg["scenario"]]
    hbm_enabled = cfg.get("baseline", {}).get("enabled", True)
    do_plots = bool(cfg.get("plots", True))
    fig_dir = os.path.join(out, "figures")
    if do_plots:
        os.makedirs(fig_dir, exist_ok=True)

    reports, pred_rows, task_entries, runtime_rows, figures = [], [], [], [], []
    for entry in bids_cfg:
        label = entry.get("label", "BID")
        bid = _qualify(_table_from_cfg(entry, "bid"), label=label)
        skip = set(entry.get("exclude_scenarios", []))
        bid_scen = [s for s in scenarios if s not in skip]
        hbm_s = indiv_s = simul_s = None

        if hbm_enabled:
            train_rows = list(bid.records) + [
                r for bh in boreholes for r in site.borehole(bh)
                if r.value(target) is not None]
            spec = _hbm_spec(cfg, seed)
            posterior, fit_s = evaluate.timeit(
                "fit", lambda: baseline.fit(spec, SiteTable(train_rows, label="hbm"),
                                            target))
            scored = {}
            pred_s = 0.0
            for bh in boreholes:
                test = [r for r in site.borehole(bh) if r.key() in truth]
                preds, secs = evaluate.timeit(
                    "predict", lambda: baseline.predict(posterior, test,
                                                        predict_seed=seed))
                pred_s += secs
                rep_label = f"bench1/hbm/{label}"
                for p, r in zip(preds, test):
                    t = truth[r.key()]
                    pred_rows.append({
                        "report": rep_label, "group": bh, "site_id": r.site_id,
                        "borehole_id": r.borehole_id, "depth": repr(r.depth),
                        "mean": repr(p.mean), "q025": repr(p.q025),
                        "q500": repr(p.q500), "q975": repr(p.q975),
                        "truth": repr(t), "covered": int(p.q025 <= t <= p.q975)})
                    scored.setdefault(bh, []).append((p, t))
            hbm_s = fit_s + pred_s
            reports.append(evaluate.MetricReport(
                label=f"bench1/hbm/{label}", groups=_scored_to_groups(scored),
                timings={"fit_s": fit_s, "predict_s": pred_s, "total_s": hbm_s},
                caveats=["single-target hierarchical baseline, not a joint "
                         "multivariate model"]))

        if "individual" in bid_scen:
            def run_one(bh):
                spec = ContextSpec(bid=bid, features=view_features(view, target),
                                   target=target, scenario="individual")
                ctask = build_individual(spec, site, bh, max_rows=max_rows,
                                         subsample_seed=seed)
                return bh, ctask, _predict_rows(
                    ckpt, ctask, truth, f"bench1/pfn-individual/{label}",
                    lambda key: bh)
            total, scored_all = 0.0, {}
            for bh, ctask, (preds, rows, scored, secs) in _map(run_one, boreholes):
                total += secs
                pred_rows += rows
                scored_all.update(scored)
                task_entries.append(ctask.manifest_entry())
                if do_plots:
                    obs = [r for r in site.borehole(bh)
                           if r.value(target) is not None]
                    fig = os.path.join(fig_dir, f"{label}_{bh.replace(':', '_')}"
                                       "_individual.svg")
                    figures.append(plots.profile_figure(
                        fig,
                        pred_depths=[k[2] for k in ctask.test_keys],
                        means=[p.mean for p in preds],
                        q025=[p.q025 for p in preds],
                        q975=[p.q975 for p in preds],
                        obs_depths=[r.depth for r in obs],
                        obs_values=[r.value(target) for r in obs],
                        title=f"{label} / {bh}", xlabel=target))
            indiv_s = total
            reports.append(evaluate.MetricReport(
                label=f"bench1/pfn-individual/{label}",
                groups=_scored_to_groups(scored_all),
                timings={"total_s": total},
                caveats=["timing covers context build and forward pass only; "
                         "pre-training is a one-time sunk cost"]))

        if "simultaneous" in bid_scen:
            spec = ContextSpec(bid=bid, features=view_features(view, target),
                               target=target, scenario="simultaneous")
            ctask = build_simultaneous(spec, site, boreholes, max_rows=max_rows,
                                       subsample_seed=seed)
            _, rows, scored, secs = _predict_rows(
                ckpt, ctask, truth, f"bench1/pfn-simultaneous/{label}",
                lambda key: key[1])
            simul_s = secs
            pred_rows += rows
            task_entries.append(ctask.manifest_entry())
            reports.append(evaluate.MetricReport(
                label=f"bench1/pfn-simultaneous/{label}",
                groups=_scored_to_groups(scored),
                timings={"total_s": secs},
                caveats=["timing covers context build and forward pass only; "
                         "pre-training is a one-time sunk cost"]))
        runtime_rows.append((label, hbm_s, indiv_s, simul_s))

    paths = evaluate.report(reports, out, basename="metrics")
    evaluate.write_predictions_table(os.path.join(out, "predictions.csv"), pred_rows)
    evaluate._atomic_write(os.path.join(out, "runtime_table.txt"),
                           evaluate.render_runtime_table(runtime_rows) + "\n")
    if do_plots:
        series = {}
        for r in reports:
            by_group = {g.group: g.rmse for g in r.groups}
            series[r.label.split("bench1/")[-1]] = [by_group.get(bh, 0.0)
                                                    for bh in boreholes]
        figures.append(plots.rmse_bars_figure(
            os.path.join(fig_dir, "rmse_bars.svg"), boreholes, series,
            title=f"{target} RMSE by borehole"))
    _write_manifest(out, "bench1", cfg, extra={"tasks": task_entries,
                                               "figures": figures})
    n_ind = sum(1 for t in task_entries if t["scenario"] == "individual")
    n_sim = sum(1 for t in task_entries if t["scenario"] == "simultaneous")
    print(f"bench1: {n_ind} individual + {n_sim} simultaneous tasks, "
          f"metrics at {paths['csv']}")
    return 0


# ------------------------------------------------------------------ bench2


def cmd_bench2(cfg: dict) -> int:
    out = cfg.get("out", ".")
    os.makedirs(out, exist_ok=True)
    seed = int(cfg.get("seed", 0))
    ckpt = _load_checkpoint(cfg)
    max_rows = int(cfg.get("max_rows", ckpt.model_cfg.max_rows))
    bid_entry = cfg.get("bid_table") or {"label": "BID", "synth": {}}
    bid = _qualify(_table_from_cfg(bid_entry, "bid"),
                   label=bid_entry.get("label", "BID"))
    problem_full = _qualify(_table_from_cfg(cfg.get("problem", {}), "problem"))
    patterns_cfg = cfg.get("patterns", DEFAULT_PATTERNS)
    masked, truth = engineer_patterns(list(problem_full.records), patterns_cfg, seed)
    patterns = detect_patterns(masked)

    hbm_enabled = cfg.get("baseline", {}).get("enabled", True)
    do_plots = bool(cfg.get("plots", True))

    task_entries, pred_rows = [], []
    scored_pfn: dict[str, list] = {}
    pfn_total = 0.0
    jobs = [(pat, target) for pat in patterns for target in pat.missing]
    for pat, target in jobs:
        ctask = build_imputation(bid, masked, pat, target, max_rows=max_rows,
                                 subsample_seed=seed)
        preds, secs = evaluate.timeit("predict", lambda: predict(ckpt, ctask.task))
        pfn_total += secs
        task_entries.append(ctask.manifest_entry())
        for p, key in zip(preds, ctask.test_keys):
            t = truth.get((key, target))
            row = {"report": "bench2/pfn", "group": target, "site_id": key[0],
                   "borehole_id": key[1], "depth": repr(key[2]),
                   "mean": repr(p.mean), "q025": repr(p.q025),
                   "q500": repr(p.q500), "q975": repr(p.q975)}
            if t is not None:
                row["truth"] = repr(t)
                row["covered"] = int(p.q025 <= t <= p.q975)
                scored_pfn.setdefault(target, []).append((p, t))
            pred_rows.append(row)
    reports = [evaluate.MetricReport(
        label="bench2/pfn", groups=_scored_to_groups(scored_pfn),
        timings={"total_s": pfn_total},
        caveats=["timing covers context build and forward pass only; "
                 "pre-training is a one-time sunk cost"])]

    hbm_total = 0.0
    if hbm_enabled:
        scored_hbm: dict[str, list] = {}
        targets = sorted({t for pat in patterns for t in pat.missing})
        spec = _hbm_spec(cfg, seed)
        for target in targets:
            train_rows = list(bid.records) + [r for r in masked
                                              if r.value(target) is not None]
            posterior, fit_s = evaluate.timeit(
                "fit", lambda: baseline.fit(spec, SiteTable(train_rows, label="hbm"),
                                            target))
            keys = {key for (key, p) in truth if p == target}
            test = [r for r in masked if r.key() in keys]
            preds, pred_s = evaluate.timeit(
                "predict", lambda: baseline.predict(posterior, test,
                                                    predict_seed=seed))
            hbm_total += fit_s + pred_s
            for p, r in zip(preds, test):
                t = truth[(r.key(), target)]
                pred_rows.append({
                    "report": "bench2/hbm", "group": target, "site_id": r.site_id,
                    "borehole_id": r.borehole_id, "depth": repr(r.depth),
                    "mean": repr(p.mean), "q025": repr(p.q025),
                    "q500": repr(p.q500), "q975": repr(p.q975),
                    "truth": repr(t), "covered": int(p.q025 <= t <= p.q975)})
                scored_hbm.setdefault(target, []).append((p, t))
        reports.append(evaluate.MetricReport(
            label="bench2/hbm", groups=_scored_to_groups(scored_hbm),
            timings={"total_s": hbm_total},
            caveats=["one independent single-target fit per parameter"]))

    paths = evaluate.report(reports, out, basename="metrics")
    evaluate.write_predictions_table(os.path.join(out, "predictions.csv"), pred_rows)
    evaluate._atomic_write(os.path.join(out, "runtime_summary.txt"),
                           evaluate.render_bench2_summary(hbm_total, pfn_total) + "\n")
    figures = []
    if do_plots:
        fig_dir = os.path.join(out, "figures")
        os.makedirs(fig_dir, exist_ok=True)
        params = [g.group for g in reports[0].groups]
        series = {}
        for r in reports:
            by_group = {g.group: g.rmse for g in r.groups}
            series[r.label.split("bench2/")[-1]] = [by_group.get(p, 0.0)
                                                    for p in params]
        figures.append(plots.rmse_bars_figure(
            os.path.join(fig_dir, "rmse_bars.svg"), params, series,
            title="imputation RMSE by parameter"))
    _write_manifest(out, "bench2", cfg, extra={
        "tasks": task_entries,
        "patterns": [list(p.missing) for p in patterns],
        "figures": figures})
    print(f"bench2: {len(patterns)} patterns, {len(task_entries)} imputation "
          f"tasks, metrics at {paths['csv']}")
    return 0


# ------------------------------------------------------------------ impute


def cmd_impute(cfg: dict) -> int:
    out = cfg.get("out", ".")
    os.makedirs(out, exist_ok=True)
    seed = int(cfg.get("seed", 0))
    ckpt = _load_checkpoint(cfg)
    max_rows = int(cfg.get("max_rows", ckpt.model_cfg.max_rows))
    bid_entry = cfg.get("bid_table") or {}
    bid = _qualify(_table_from_cfg(bid_entry, "bid"),
                   label=bid_entry.get("label", "BID"))
    problem = _qualify(_table_from_cfg(cfg.get("problem", {}), "problem"))
    patterns = detect_patterns(problem.records)
    if not patterns:
        raise DataError("problem table has no records with missing mechanical "
                        "parameters; nothing to impute")

    task_entries, out_rows = [], []
    for pat in patterns:
        for target in pat.missing:
            ctask = build_imputation(bid, list(problem.records), pat, target,
                                     max_rows=max_rows, subsample_seed=seed)
            preds = predict(ckpt, ctask.task)
            task_entries.append(ctask.manifest_entry())
            for p, key in zip(preds, ctask.test_keys):
                out_rows.append([key[0], key[1], repr(key[2]), target,
                                 repr(p.mean), repr(p.q025), repr(p.q500),
                                 repr(p.q975)])
    path = os.path.join(out, "imputed.csv")
    lines = ["site_id,borehole_id,depth,parameter,mean,q025,q500,q975"]
    lines += [",".join(map(str, r)) for r in out_rows]
    evaluate._atomic_write(path, "\n".join(lines) + "\n")
    _write_manifest(out, "impute", cfg, extra={"tasks": task_entries})
    print(f"impute: {len(task_entries)} tasks, {len(out_rows)} imputed values "
          f"at {path}")
    return 0


# ------------------------------------------------------------------ report


def cmd_report(cfg: dict) -> int:
    out = cfg.get("out", ".")
    os.makedirs(out, exist_ok=True)
    src = cfg.get("metrics_json")
    if not src:
        raise ConfigUsageError("report needs a 'metrics_json' path")
    try:
        reports = evaluate.load_reports_json(src)
    except OSError as exc:
        raise DataError(f"cannot read {src}: {exc}")
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{src} is not a metrics JSON file: {exc}")
    paths = evaluate.report(reports, out, basename=cfg.get("basename", "metrics"))
    figures = []
    if cfg.get("plots", True):
        fig_dir = os.path.join(out, "figures")
        os.makedirs(fig_dir, exist_ok=True)
        labels = [r.label for r in reports]
        figures.append(plots.rmse_bars_figure(
            os.path.join(fig_dir, "pooled_rmse.svg"), labels,
            {"pooled RMSE": [r.pooled_rmse() for r in reports]},
            title="pooled RMSE by report"))
    _write_manifest(out, "report", cfg, extra={"figures": figures})
    print(f"report: {len(reports)} reports re-rendered at {paths['csv']}")
    return 0


# -------------------------------------------------------------------- main


COMMANDS = {
    "pretrain": cmd_pretrain,
    "synth": cmd_synth,
    "bench1": cmd_bench1,
    "bench2": cmd_bench2,
    "impute": cmd_impute,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geopfn",
        description="In-context probabilistic prediction of geotechnical "
                    "parameters with a prior-data fitted network.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, help_text in [
        ("pretrain", "train a PFN on synthetic prior tasks"),
        ("synth", "generate a synthetic site table"),
        ("bench1", "depth-profile prediction benchmark (PFN vs baseline)"),
        ("bench2", "missing-parameter imputation benchmark"),
        ("impute", "impute missing mechanical parameters in a site table"),
        ("report", "re-render metric tables and figures from a metrics JSON"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file (or a prior run's "
                                        "manifest.json)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--checkpoint", help="model checkpoint path")
        p.add_argument("--out", help="output directory")
        p.add_argument("--bid", help="restrict bench1 to one BID label")
        p.add_argument("--view", choices=["4", "11"],
                       help="feature view: coordinates only (4) or all "
                            "parameters (11)")
        p.add_argument("--scenario", choices=["individual", "simultaneous"],
                       help="restrict bench1 to one scenario")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = _load_config(args.config, args.subcommand) if args.config else {}
    for flag in ("seed", "checkpoint", "out", "bid", "view", "scenario"):
        v = getattr(args, flag, None)
        if v is not None:
            cfg[flag] = v
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.subcommand](cfg)
    except (ConfigUsageError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ContextError, PriorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except GeopfnError as exc:  # checkpoint, training, numerics
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
