"""On-disk formats: checkpoint JSON, metrics CSV, manifests, reports, tables.

Field-by-field definitions live in FORMATS.md at the repository root.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .mlp import PARAM_NAMES, Checkpoint, Model

FORMAT_VERSION = 1
CHECKPOINT_KINDS = ("saturation", "final", "constructed", "extracted")
METRICS_COLUMNS = ("step", "train_loss", "train_acc", "val_acc")


class FormatError(ValueError):
    """A file does not match the expected schema or format version."""


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(path, payload):
    """Atomic JSON write (temp file + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(_jsonable(payload), fh, indent=1, allow_nan=False)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path, kind=None):
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise FormatError(f"{path}: top level must be an object")
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: format_version {version!r}, expected {FORMAT_VERSION}")
    if kind is not None and payload.get("file") != kind:
        raise FormatError(f"{path}: expected a {kind} file, got {payload.get('file')!r}")
    return payload


def save_checkpoint(path, checkpoint, **meta):
    """Write a checkpoint; ``meta`` adds fields such as alpha, master_seed, stop_reason."""
    if checkpoint.kind not in CHECKPOINT_KINDS:
        raise ValueError(f"unknown checkpoint kind {checkpoint.kind!r}")
    model = checkpoint.model
    fields = {**checkpoint.meta, **meta}
    payload = {
        "format_version": FORMAT_VERSION,
        "file": "checkpoint",
        "kind": checkpoint.kind,
        "p": model.p,
        "n_hidden": model.n_hidden,
        "alpha": fields.pop("alpha", None),
        "master_seed": fields.pop("master_seed", None),
        "step": int(checkpoint.step),
        "stop_reason": fields.pop("stop_reason", None),
    }
    payload.update(fields)
    for name in PARAM_NAMES:
        payload[name] = getattr(model, name)
    write_json(path, payload)


def load_checkpoint(path):
    payload = read_json(path, kind="checkpoint")
    missing = [k for k in ("kind", "p", "n_hidden", "step", *PARAM_NAMES) if k not in payload]
    if missing:
        raise FormatError(f"{path}: missing fields {missing}")
    if payload["kind"] not in CHECKPOINT_KINDS:
        raise FormatError(f"{path}: unknown checkpoint kind {payload['kind']!r}")
    try:
        model = Model(*(np.asarray(payload[k], dtype=np.float64) for k in PARAM_NAMES))
    except (ValueError, TypeError) as exc:
        raise FormatError(f"{path}: bad weight arrays ({exc})") from exc
    if model.p != payload["p"] or model.n_hidden != payload["n_hidden"]:
        raise FormatError(f"{path}: weight shapes disagree with p/n_hidden")
    meta = {k: v for k, v in payload.items() if k not in PARAM_NAMES}
    return Checkpoint(model, int(payload["step"]), payload["kind"], meta)


def write_metrics_csv(path, history):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_COLUMNS)
        for row in history:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in METRICS_COLUMNS])


def read_metrics_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != METRICS_COLUMNS:
            raise FormatError(f"{path}: header {reader.fieldnames}, expected {list(METRICS_COLUMNS)}")
        return [
            {"step": int(r["step"]), **{c: float(r[c]) for c in METRICS_COLUMNS[1:]}} for r in reader
        ]


def write_rows_csv(path, rows, columns):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else v) for k, v in row.items()})


def read_rows_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
