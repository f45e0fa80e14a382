"""Trajectory CSV and JSON document helpers."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import Trajectory
from .errors import ConfigError, EmptyTrajectory

FORMAT_VERSION = 1


def write_trajectory_csv(path, traj: Trajectory):
    """Header ``t,omega``; seconds to 6 decimals, per-unit frequency to 9."""
    with open(path, "w", newline="") as fh:
        fh.write("t,omega\n")
        for t, w in zip(traj.t, traj.omega):
            fh.write(f"{t:.6f},{w:.9f}\n")


def read_trajectory_csv(path, node_id: str = "") -> Trajectory:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"trajectory file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["t", "omega"]:
            raise ConfigError(f"{path}: expected header 't,omega'")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    if not rows:
        raise EmptyTrajectory(f"{path}: no samples")
    arr = np.array(rows)
    return Trajectory(arr[:, 0], arr[:, 1], node_id or path.stem)


def write_columns_csv(path, header, columns, fmt=None):
    """Write equal-length columns under ``header``; ``fmt`` holds one format spec per column."""
    fmt = fmt or ["{}"] * len(header)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(f.format(v) for f, v in zip(fmt, row)) + "\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def write_json(path, doc: dict):
    with open(path, "w") as fh:
        json.dump(_plain(doc), fh, indent=2)
        fh.write("\n")


def read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"file not found: {path}")
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
