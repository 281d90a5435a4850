"""CSV and JSON artifact writers."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from ..geometry import fmt

SCHEMA_VERSION = 1
CSV_SCHEMAS = {
    "original.csv": ["component_id", "param0", "param1", "x", "y", "z"],
    "decoded.csv": ["component_id", "x", "y", "z", "x_hat", "y_hat", "z_hat", "err"],
    "bottleneck.csv": ["component_id", "u"],
}


def jsonable(obj):
    """Plain JSON types; non-finite floats become the strings "inf"/"-inf"/"nan"."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return obj


def write_json(path, obj) -> None:
    text = json.dumps(jsonable(obj), indent=2, ensure_ascii=False, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def write_decoded_csv(path, component_id, X, X_hat) -> np.ndarray:
    err = np.linalg.norm(X_hat - X, axis=1)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_SCHEMAS["decoded.csv"])
        for c, x, xh, e in zip(component_id, X, X_hat, err):
            w.writerow([int(c), *map(fmt, x), *map(fmt, xh), fmt(e)])
    return err


def write_bottleneck_csv(path, component_id, U) -> None:
    U = np.asarray(U).reshape(len(component_id), -1)
    header = ["component_id"] + (["u"] if U.shape[1] == 1 else [f"u{i}" for i in range(U.shape[1])])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for c, u in zip(component_id, U):
            w.writerow([int(c), *map(fmt, u)])


def write_history_csv(path, history) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        for i, v in enumerate(history, 1):
            w.writerow([i, fmt(v)])


def summary(command: str, config_hash: str | None, wall_clock: float, **fields) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "command": command, "config_hash": config_hash,
           "csv_schemas": CSV_SCHEMAS}
    out.update(fields)
    out["wall_clock_seconds"] = wall_clock
    return out
