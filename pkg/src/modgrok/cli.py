"""Command-line entry point: ``modgrok {train,sweep,construct-table,extract-table,analyze}``.

Exit codes: 0 success, 1 invalid input, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

from . import experiments as ex
from .analysis import SWEEP_COLUMNS
from .idealize import SETTING_NAMES, ConstructionSetting, cosine_counterpart, fit_ideal_square_wave
from .io import FormatError, write_json, write_rows_csv
from .mlp import TrainConfig, TrainingError
from .spectral import NoDominantComponentError

logger = logging.getLogger("modgrok")

OUTPUT_ENV = "MODGROK_OUTPUT_ROOT"
EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2


class UsageError(ValueError):
    pass


def default_root():
    return Path(os.environ.get(OUTPUT_ENV, "runs"))


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    """``"1,2,5"`` or a range ``"0-39"``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


# TrainConfig field -> flag type; flags are the field names with dashes
CONFIG_FLAGS = {
    "p": int,
    "n_hidden": int,
    "train_frac": float,
    "alpha": float,
    "seed": int,
    "lr": float,
    "weight_decay": float,
    "eval_every": int,
    "patience": int,
    "min_delta": float,
    "val_threshold": float,
    "max_steps": int,
    "saturation_threshold": float,
}


def _add_config_flags(parser, include_alpha_seed=True):
    parser.add_argument("--config", type=Path, help="JSON file of config keys; flags override it")
    parser.add_argument("--fast", action="store_true", help="small CI profile (p=31, N=128, 60k steps)")
    for name, typ in CONFIG_FLAGS.items():
        if not include_alpha_seed and name in ("alpha", "seed"):
            continue
        parser.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)


def load_config_file(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return data


def build_config(args, file_cfg):
    """Defaults, then the fast profile, then the config file, then explicit flags."""
    values = TrainConfig().to_dict()
    if getattr(args, "fast", False) or file_cfg.get("fast"):
        values.update(ex.FAST_PROFILE)
    known = {f.name for f in fields(TrainConfig)}
    unknown = set(file_cfg) - known - {"fast", "alphas", "seeds", "out", "jobs"}
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    values.update({k: v for k, v in file_cfg.items() if k in known})
    for name in CONFIG_FLAGS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    try:
        return TrainConfig(**values).validate()
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from exc


def cmd_train(args):
    file_cfg = load_config_file(args.config)
    cfg = build_config(args, file_cfg)
    out = args.run_dir or Path(file_cfg.get("out", default_root())) / ex.run_dir_name(cfg.alpha, cfg.seed)
    logger.info("training alpha=%.2f seed=%d into %s", cfg.alpha, cfg.seed, out)
    record = ex.run_training(cfg, out)
    print(
        f"{out}: stop_reason={record.stop_reason} step={record.final.step} "
        f"val_acc={record.final_val_acc():.4f}"
    )
    return EXIT_OK


def cmd_sweep(args):
    file_cfg = load_config_file(args.config)
    cfg = build_config(args, file_cfg)
    alphas = args.alphas if args.alphas is not None else file_cfg.get("alphas", list(ex.PAPER_ALPHAS))
    seeds = args.seeds if args.seeds is not None else file_cfg.get("seeds", [cfg.seed])
    for a in alphas:
        if not 0.0 <= a <= 1.0:
            raise UsageError(f"alpha {a} outside [0, 1]")
    root = args.out or Path(file_cfg.get("out", default_root()))
    manifest = ex.sweep(cfg, alphas, seeds, root, jobs=args.jobs or file_cfg.get("jobs", 1))
    failed = [k for k, v in manifest["runs"].items() if v.get("status") != "done"]
    print(f"{root}: {len(manifest['runs']) - len(failed)} runs done, {len(failed)} failed")
    return EXIT_RUNTIME if failed else EXIT_OK


def _settings(text):
    names = [s for s in text.split(",") if s.strip()] if text else list(SETTING_NAMES)
    try:
        return [ConstructionSetting.parse(s).name for s in names]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_construct_table(args):
    seeds = args.seeds if args.seeds is not None else list(range(40))
    if not args.widths or any(w < 1 for w in args.widths):
        raise UsageError("widths must be a non-empty list of positive integers")
    rows = ex.construct_table(args.widths, seeds, _settings(args.settings), p=args.p)
    _emit_rows(rows, ex.TABLE1_COLUMNS, args.output)
    return EXIT_OK


def cmd_extract_table(args):
    if not args.directory.is_dir():
        raise UsageError(f"{args.directory} is not a directory")
    settings = _settings(args.settings)
    rows, warnings = ex.extract_table(args.directory, settings)
    cols = [c for c in ex.TABLE2_COLUMNS if c not in SETTING_NAMES or c in settings]
    _emit_rows(rows, cols, args.output)
    if warnings:
        print(f"{len(warnings)} warning(s)", file=sys.stderr)
    return EXIT_OK


def _emit_rows(rows, columns, output):
    if output:
        write_rows_csv(output, rows, columns)
        print(f"wrote {len(rows)} rows to {output}")
    else:
        writer = csv.DictWriter(sys.stdout, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _figure_weights(model):
    """Rows of (neuron, vector, j, weight, square, cosine) for the wave overlay plots."""
    rows = []
    p = model.p
    for i in range(model.n_hidden):
        for vec in ("w_a", "w_b"):
            w = getattr(model, vec)[i]
            try:
                wave = fit_ideal_square_wave(w).wave
            except NoDominantComponentError:
                continue
            cos = cosine_counterpart(wave)
            for j in range(p):
                rows.append(
                    {"neuron": i, "vector": vec, "j": j, "weight": float(w[j]),
                     "ideal_square": float(wave(j, p)), "ideal_cosine": float(cos(j, p))}
                )  # fmt: skip
    return rows


def _analyze_one(path, out, resolution):
    ckpt, report = ex.analyze_checkpoint(path, resolution)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "report.json", report)
    summary = dict(report["summary"])
    flat = {k: v for k, v in summary.items() if not isinstance(v, dict)}
    for key in ("effective_bias", "ablation"):
        for k, v in summary.get(key, {}).items():
            flat[f"{key}_{k}"] = v
    for restrict, res in summary["ttest"].items():
        for k in ("t", "df", "p"):
            flat[f"ttest_{restrict}_{k}"] = res.get(k)
    write_rows_csv(out / "summary.csv", [flat], list(flat))
    neurons = report["neurons"]
    write_rows_csv(out / "neurons.csv", neurons, list(neurons[0]))
    write_rows_csv(
        out / "fig_phases.csv",
        [{k: n[k] for k in ("neuron", "group", "phase_sum", "phase_out")} for n in neurons],
        ["neuron", "group", "phase_sum", "phase_out"],
    )
    write_rows_csv(
        out / "fig_weights.csv",
        _figure_weights(ckpt.model),
        ["neuron", "vector", "j", "weight", "ideal_square", "ideal_cosine"],
    )
    s = report["summary"]
    print(
        f"{path}: structured={s['n_structured']} unstructured={s['n_unstructured']} "
        f"excluded={s['n_excluded']} r_all={s['r_all']} r_structured={s['r_structured']}"
    )
    return report


def cmd_analyze(args):
    target = args.path
    if not target.exists():
        raise UsageError(f"{target} does not exist")
    out = args.out or (target.parent if target.is_file() else target) / "analysis"
    if target.is_file():
        _analyze_one(target, out, args.resolution)
        return EXIT_OK
    runs = ex.find_runs(target)
    if not runs:
        raise UsageError(f"{target}: no run directories found")
    phase_rows = []
    for run_dir in runs:
        ckpt_path = run_dir / "final.json"
        if not ckpt_path.exists():
            logger.warning("%s: no final checkpoint", run_dir)
            continue
        report = _analyze_one(ckpt_path, out / run_dir.name, args.resolution)
        alpha = report["checkpoint"]["alpha"]
        phase_rows += [
            {"alpha": alpha, **{k: n[k] for k in ("neuron", "group", "phase_sum", "phase_out")}}
            for n in report["neurons"]
        ]
    if len(runs) > 1 or target != runs[0]:
        rows = ex.sweep_table(target)
        write_rows_csv(out / "sweep_summary.csv", rows, SWEEP_COLUMNS)
        write_rows_csv(out / "fig_sweep_phases.csv", phase_rows, ["alpha", "neuron", "group", "phase_sum", "phase_out"])
        print(f"wrote {len(rows)}-row sweep summary to {out / 'sweep_summary.csv'}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="modgrok", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model")
    _add_config_flags(p)
    p.add_argument("--run-dir", type=Path, help=f"output directory (default ${OUTPUT_ENV}/alphaA_seedS)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="train every alpha x seed pair")
    _add_config_flags(p, include_alpha_seed=False)
    p.add_argument("--alphas", type=_floats, default=None, help="comma list (default: the 19 paper values)")
    p.add_argument("--seeds", type=_ints, default=None, help="comma list or range, e.g. 0-4")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("construct-table", help="accuracy of from-scratch idealized models")
    p.add_argument("--widths", type=_ints, default=list(ex.TABLE1_WIDTHS))
    p.add_argument("--seeds", type=_ints, default=None, help="default 0-39")
    p.add_argument("--settings", default=None, help="comma list of Cos->Cos,Sq->Cos,Sq->Sq")
    p.add_argument("--p", type=int, default=97)
    p.add_argument("--output", type=Path, default=None, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_construct_table)

    p = sub.add_parser("extract-table", help="real vs extracted accuracy for trained runs")
    p.add_argument("directory", type=Path)
    p.add_argument("--settings", default=None)
    p.add_argument("--output", type=Path, default=None)
    p.set_defaults(func=cmd_extract_table)

    p = sub.add_parser("analyze", help="analysis report and figure data")
    p.add_argument("path", type=Path, help="checkpoint JSON, run directory or sweep directory")
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--resolution", type=int, default=100)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (UsageError, FormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TrainingError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
