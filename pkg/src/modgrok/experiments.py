"""Run directories, sweeps and the two accuracy tables."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from .analysis import analyze_model, sweep_summary
from .dataset import make_dataset
from .idealize import SETTING_NAMES, ConstructionSetting, construct_scratch_model, extract_idealized_model
from .io import (
    FORMAT_VERSION,
    FormatError,
    load_checkpoint,
    read_json,
    save_checkpoint,
    write_json,
    write_metrics_csv,
    write_rows_csv,
)
from .mlp import TrainConfig, TrainingError, evaluate_accuracy, forward, train

logger = logging.getLogger(__name__)

PAPER_ALPHAS = (
    0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09,
    0.10, 0.11, 0.12, 0.13, 0.14, 0.15, 0.20, 0.25, 0.30,
)  # fmt: skip
TABLE1_WIDTHS = (16, 32, 64, 96, 128, 192, 256, 384, 512)
TABLE1_COLUMNS = ("n_hidden", "setting", "mean_acc", "sd_acc", "n_seeds")
TABLE2_COLUMNS = ("alpha", "seed", "checkpoint", "step", "real", "Sq->Sq", "Sq->Cos", "Cos->Cos")
FAST_PROFILE = {"p": 31, "n_hidden": 128, "eval_every": 50, "max_steps": 60_000}


def run_dir_name(alpha, seed):
    return f"alpha{alpha:.2f}_seed{seed}"


def config_from_dict(d):
    names = {f.name for f in fields(TrainConfig)}
    return TrainConfig(**{k: v for k, v in d.items() if k in names})


def _progress(name, every=1000):
    def log(row):
        if row["step"] % every == 0:
            logger.info("%s step %d: train_acc %.4f val_acc %.4f", name, row["step"], row["train_acc"], row["val_acc"])

    return log


def run_training(config, out_dir):
    """Train one model and persist metrics, checkpoints and a manifest into ``out_dir``.

    Raises :class:`TrainingError` after writing a ``failed`` manifest if the
    run diverges.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": FORMAT_VERSION,
        "file": "run-manifest",
        "config": config.to_dict(),
    }
    t0 = time.perf_counter()
    try:
        record = train(config, callback=_progress(out.name))
    except TrainingError as exc:
        manifest.update(status="failed", error=str(exc), wall_time=time.perf_counter() - t0)
        write_json(out / "manifest.json", manifest)
        raise
    meta = {
        "alpha": config.alpha,
        "master_seed": config.seed,
        "stop_reason": record.stop_reason,
        "train_frac": config.train_frac,
    }
    write_metrics_csv(out / "metrics.csv", record.history)
    save_checkpoint(out / "final.json", record.final, **meta)
    if record.saturation is not None:
        save_checkpoint(out / "saturation.json", record.saturation, **meta)
    last = record.history[-1]
    manifest.update(
        status="done",
        stop_reason=record.stop_reason,
        final_step=record.final.step,
        saturation_step=None if record.saturation is None else record.saturation.step,
        final_val_acc=last["val_acc"],
        final_train_acc=last["train_acc"],
        wall_time=record.wall_time,
    )
    write_json(out / "manifest.json", manifest)
    return record


def load_run(run_dir):
    """Manifest plus whichever checkpoints exist, keyed ``final``/``saturation``."""
    run_dir = Path(run_dir)
    manifest = read_json(run_dir / "manifest.json", kind="run-manifest")
    ckpts = {}
    for kind in ("final", "saturation"):
        path = run_dir / f"{kind}.json"
        if path.exists():
            ckpts[kind] = load_checkpoint(path)
    return manifest, ckpts


def validation_set(config):
    return make_dataset(config.p, config.train_frac, config.alpha, config.seed).arrays("val")


def _sweep_worker(args):
    config, out_dir = args
    try:
        record = run_training(config, out_dir)
        return {"status": "done", "stop_reason": record.stop_reason}
    except TrainingError as exc:
        return {"status": "failed", "error": str(exc)}


def sweep(base_config, alphas, seeds, out_root, jobs=1):
    """Train every (alpha, seed) pair, skipping runs the sweep manifest marks done.

    Returns the sweep manifest. Parallel execution gives the same numbers as
    serial: every run is seeded independently and owns its directory.
    """
    root = Path(out_root)
    root.mkdir(parents=True, exist_ok=True)
    manifest_path = root / "sweep.json"
    if manifest_path.exists():
        manifest = read_json(manifest_path, kind="sweep-manifest")
    else:
        manifest = {"format_version": FORMAT_VERSION, "file": "sweep-manifest", "runs": {}}
    manifest["base_config"] = base_config.to_dict()

    todo = []
    for alpha in alphas:
        for seed in seeds:
            name = run_dir_name(alpha, seed)
            entry = manifest["runs"].get(name)
            if entry and entry.get("status") == "done" and (root / name / "final.json").exists():
                logger.info("skipping completed run %s", name)
                continue
            cfg = replace(base_config, alpha=float(alpha), seed=int(seed)).validate()
            todo.append((name, cfg))

    def record(name, cfg, result):
        manifest["runs"][name] = {"alpha": cfg.alpha, "seed": cfg.seed, "dir": name, **result}
        write_json(manifest_path, manifest)

    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = pool.map(_sweep_worker, [(cfg, root / name) for name, cfg in todo])
            for (name, cfg), result in zip(todo, results):
                record(name, cfg, result)
    else:
        for name, cfg in todo:
            record(name, cfg, _sweep_worker((cfg, root / name)))
    write_json(manifest_path, manifest)
    return manifest


def all_pairs(p):
    a, b = np.divmod(np.arange(p * p), p)
    X = np.column_stack([a, b])
    return X, (a + b) % p


def table1_accuracies(widths, seeds, setting, p=97):
    """Per-seed accuracies of from-scratch models on all ``p**2`` pairs, shape ``(widths, seeds)``."""
    X, y = all_pairs(p)
    setting = ConstructionSetting.parse(setting)
    return np.array(
        [
            [np.mean(np.argmax(forward(construct_scratch_model(p, n, setting, s), X), axis=1) == y) for s in seeds]
            for n in widths
        ]
    )


def construct_table(widths=TABLE1_WIDTHS, seeds=range(40), settings=tuple(SETTING_NAMES), p=97):
    """Rows ``(n_hidden, setting, mean_acc, sd_acc, n_seeds)`` of from-scratch model accuracy."""
    seeds = list(seeds)
    rows = []
    for name in settings:
        setting = ConstructionSetting.parse(name)
        accs = table1_accuracies(widths, seeds, setting, p)
        for n, acc in zip(widths, accs):
            rows.append(
                {
                    "n_hidden": int(n),
                    "setting": setting.name,
                    "mean_acc": float(acc.mean()),
                    "sd_acc": float(acc.std(ddof=1)) if acc.size > 1 else 0.0,
                    "n_seeds": int(acc.size),
                }
            )
    rows.sort(key=lambda r: (r["n_hidden"], list(SETTING_NAMES).index(r["setting"])))
    return rows


def extraction_row(checkpoint, X_val, y_val, settings=tuple(SETTING_NAMES)):
    row = {"step": checkpoint.step, "real": evaluate_accuracy(checkpoint.model, X_val, y_val)}
    for name in settings:
        ideal = extract_idealized_model(checkpoint.model, name)
        row[ConstructionSetting.parse(name).name] = evaluate_accuracy(ideal, X_val, y_val)
    return row


def find_runs(root):
    root = Path(root)
    if (root / "manifest.json").exists():
        return [root]
    return sorted(p.parent for p in root.glob("*/manifest.json"))


def extract_table(root, settings=tuple(SETTING_NAMES)):
    """Real and extracted validation accuracies for every run under ``root``.

    Returns ``(rows, warnings)``; runs or checkpoints that are missing or
    unreadable are skipped with a warning.
    """
    rows, warnings = [], []
    for run_dir in find_runs(root):
        try:
            manifest, ckpts = load_run(run_dir)
        except (FormatError, OSError) as exc:
            warnings.append(f"{run_dir}: {exc}")
            continue
        cfg = config_from_dict(manifest["config"])
        X_val, y_val = validation_set(cfg)
        for kind in ("final", "saturation"):
            if kind not in ckpts:
                warnings.append(f"{run_dir}: no {kind} checkpoint")
                continue
            row = {"alpha": cfg.alpha, "seed": cfg.seed, "checkpoint": kind}
            row.update(extraction_row(ckpts[kind], X_val, y_val, settings))
            rows.append(row)
    if not rows:
        warnings.append(f"{root}: no usable runs")
    for w in warnings:
        logger.warning(w)
    rows.sort(key=lambda r: (r["checkpoint"] != "final", r["alpha"], r["seed"]))
    return rows, warnings


def analyze_checkpoint(path, resolution=100):
    """Analysis report for one checkpoint file, validated on its own split when known."""
    ckpt = load_checkpoint(path)
    model = ckpt.model
    X_val = y_val = None
    meta = ckpt.meta
    if meta.get("master_seed") is not None and meta.get("alpha") is not None:
        cfg = TrainConfig(p=model.p, alpha=meta["alpha"], seed=meta["master_seed"])
        if "train_frac" in meta:
            cfg.train_frac = meta["train_frac"]
        X_val, y_val = validation_set(cfg)
    else:
        X_val, y_val = all_pairs(model.p)
    report = analyze_model(model, X_val, y_val, resolution)
    report.update(
        format_version=FORMAT_VERSION,
        file="report",
        source=str(path),
        checkpoint={k: meta.get(k) for k in ("kind", "alpha", "master_seed", "step", "stop_reason")},
    )
    return ckpt, report


def sweep_table(root):
    """Sweep summary rows (one per run) from a directory of run directories."""
    runs = []
    for run_dir in find_runs(root):
        manifest, ckpts = load_run(run_dir)
        if "final" not in ckpts:
            continue
        cfg = config_from_dict(manifest["config"])
        X_val, y_val = validation_set(cfg)
        model = ckpts["final"].model
        runs.append((cfg.alpha, model, evaluate_accuracy(model, X_val, y_val)))
    return sweep_summary(runs) if runs else []


def write_table(path, rows, columns):
    write_rows_csv(path, rows, columns)

