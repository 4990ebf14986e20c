"""Readers for the CSV, JSON and checkpoint artifacts, using only numpy and the stdlib."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

CHECKPOINT_FORMAT = "metabandit-checkpoint"
CHECKPOINT_VERSION = 1


def read_csv(path) -> dict[str, np.ndarray]:
    """Columns keyed by header name; numeric columns become float arrays."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    out = {}
    for k, name in enumerate(header):
        col = [r[k] for r in body]
        try:
            out[name] = np.array([float(v) for v in col])
        except ValueError:
            out[name] = np.array(col)
    return out


def read_phase_csv(path) -> dict:
    """Phase diagram CSV as grids with rows following sigma_l and columns sigma_p."""
    t = read_csv(path)
    sl = np.unique(t["sigma_l"])
    sp = np.unique(t["sigma_p"])
    n = np.zeros((sl.size, sp.size), dtype=int)
    v = np.zeros((sl.size, sp.size))
    i = np.searchsorted(sl, t["sigma_l"])
    j = np.searchsorted(sp, t["sigma_p"])
    n[i, j] = t["n_star"].astype(int)
    v[i, j] = t["v_star"]
    return {"sigma_l": sl, "sigma_p": sp, "lifetime": int(t["lifetime"][0]), "n_star": n, "v_star": v}


def read_phase_json(path) -> dict:
    d = json.loads(Path(path).read_text())
    rows, cols = d["rows"], d["cols"]
    return {
        "sigma_l": np.asarray(d["sigma_l_grid"], dtype=float),
        "sigma_p": np.asarray(d["sigma_p_grid"], dtype=float),
        "lifetime": d["lifetime"],
        "n_star": np.asarray(d["n_star"], dtype=int).reshape(rows, cols),
        "v_star": np.asarray(d["v_star"], dtype=float).reshape(rows, cols),
    }


def read_occupancy_csv(path) -> np.ndarray:
    """Occupancy as an array indexed [y, x]."""
    t = read_csv(path)
    x = t["x"].astype(int)
    y = t["y"].astype(int)
    grid = np.zeros((y.max() + 1, x.max() + 1))
    grid[y, x] = t["count"]
    return grid


def read_checkpoint(path) -> dict:
    """Manifest plus named parameter tensors reshaped from the column-major blob."""
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a checkpoint manifest")
    if manifest.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported format_version {manifest.get('format_version')}")
    flat = np.fromfile(path / manifest["blob"], dtype="<f8")
    if flat.size != manifest["param_count"]:
        raise ValueError(f"{path}: blob has {flat.size} values, manifest says {manifest['param_count']}")
    tensors = {}
    for t in manifest["tensors"]:
        shape = tuple(t["shape"])
        size = int(np.prod(shape))
        block = flat[t["offset"]: t["offset"] + size]
        tensors[t["name"]] = block.reshape(shape, order="F")
    return {"manifest": manifest, "flat": flat, "tensors": tensors}
