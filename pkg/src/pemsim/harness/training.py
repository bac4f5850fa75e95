"""Model training dispatch for the harness."""

from __future__ import annotations

import numpy as np

from ..surrogates import (Standardizer, TupleDataset, fit_gf, train_lr_focal,
                          train_ns)
from .config import HarnessConfig


def split_train_val(dataset: TupleDataset, val_fraction: float,
                    rng: np.random.Generator):
    n = len(dataset)
    idx = rng.permutation(n)
    n_val = max(1, int(round(n * val_fraction))) if n > 1 else 0
    return dataset.subset(idx[n_val:]), dataset.subset(idx[:n_val])


def train_model(kind: str, dataset: TupleDataset, cfg: HarnessConfig,
                seed: int):
    """Train one surrogate; returns (model, info dict).

    Model payloads: ns -> NeuralSurrogate; lr -> (LRParams, Standardizer);
    gf -> GFParams.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(seed)
    if kind == "ns":
        train_ds, val_ds = split_train_val(dataset, cfg.collect.val_fraction,
                                           rng)
        model = train_ns(train_ds, val_ds, cfg.ns, rng)
        return model, {"train_loss": model.train_loss,
                       "val_loss": model.val_loss}
    if kind == "lr":
        std = Standardizer.fit(dataset.features)
        params = train_lr_focal(
            std.apply(dataset.features), dataset.detected, rng,
            alpha=cfg.lr.alpha, gamma=cfg.lr.gamma,
            lr=cfg.lr.learning_rate, iters=cfg.lr.iterations,
            batch_size=cfg.lr.batch_size)
        return (params, std), {}
    if kind == "gf":
        mask = dataset.detected > 0.5
        params = fit_gf(dataset.pos_err[mask], dataset.vel_err[mask])
        return params, {"n_detected": int(mask.sum())}
    raise ValueError(f"unknown model kind {kind!r}")
