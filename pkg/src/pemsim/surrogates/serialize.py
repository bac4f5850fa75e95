"""Plain-text (JSON) model persistence.

Format version 1: a top-level object with `format_version`, `kind`, the
feature schema, the standardizer, and flat number arrays with shapes.
Files are written with sorted keys so identical models serialize to
identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .baselines import GFParams, LRParams
from .features import FEATURE_NAMES, Standardizer
from .mlp import MLPParams
from .neural import NeuralSurrogate

FORMAT_VERSION = 1


def _flat(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": [float(v) for v in a.ravel()]}


def _unflat(d: dict) -> np.ndarray:
    return np.array(d["data"], dtype=float).reshape(d["shape"])


def save_ns(path, model: NeuralSurrogate) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "ns",
        "features": list(FEATURE_NAMES),
        "standardizer": {"mean": _flat(model.standardizer.mean),
                         "std": _flat(model.standardizer.std)},
        "arch": {"n_blocks": model.params.n_blocks,
                 "dropout": model.params.dropout,
                 "velocity_head": model.params.velocity_head},
        "arrays": {k: _flat(v) for k, v in model.params.arrays.items()},
        "train_loss": model.train_loss,
        "val_loss": model.val_loss,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def save_lr(path, params: LRParams, standardizer: Standardizer) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "lr",
        "features": list(FEATURE_NAMES),
        "standardizer": {"mean": _flat(standardizer.mean),
                         "std": _flat(standardizer.std)},
        "arrays": {"weights": _flat(params.weights)},
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def save_gf(path, params: GFParams) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "gf",
        "arrays": {"pos_mean": _flat(params.pos_mean),
                   "pos_std": _flat(params.pos_std),
                   "vel_loc": _flat(params.vel_loc),
                   "vel_scale": _flat(params.vel_scale)},
        "vel_dof": params.vel_dof,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_model(path):
    """Load any saved model; returns (kind, payload).

    kind "ns" -> NeuralSurrogate, "lr" -> (LRParams, Standardizer),
    "gf" -> GFParams.
    """
    doc = json.loads(Path(path).read_text())
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version}")
    kind = doc["kind"]
    if kind == "ns":
        if doc["features"] != list(FEATURE_NAMES):
            raise ValueError("model feature schema does not match")
        std = Standardizer(_unflat(doc["standardizer"]["mean"]),
                           _unflat(doc["standardizer"]["std"]))
        arrays = {k: _unflat(v) for k, v in doc["arrays"].items()}
        params = MLPParams(arrays, doc["arch"]["n_blocks"],
                           doc["arch"]["dropout"],
                           doc["arch"]["velocity_head"])
        return kind, NeuralSurrogate(params, std, doc.get("train_loss", np.nan),
                                     doc.get("val_loss", np.nan))
    if kind == "lr":
        std = Standardizer(_unflat(doc["standardizer"]["mean"]),
                           _unflat(doc["standardizer"]["std"]))
        return kind, (LRParams(_unflat(doc["arrays"]["weights"])), std)
    if kind == "gf":
        a = doc["arrays"]
        return kind, GFParams(_unflat(a["pos_mean"]), _unflat(a["pos_std"]),
                              _unflat(a["vel_loc"]), _unflat(a["vel_scale"]),
                              doc["vel_dof"])
    raise ValueError(f"unknown model kind {kind!r}")
