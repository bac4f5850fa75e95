"""Training loop and sampling for the neural perception surrogate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..detector import Detection
from ..scene import SalientVector
from .data import TupleDataset
from .features import Standardizer, feature_matrix
from .mlp import (AdamState, MLPParams, adam_step, init_mlp, ns_backward,
                  ns_forward, ns_loss, split_heads, stable_sigmoid)
from .sampling import stratified_weights


@dataclass
class NSHyperparams:
    width: int = 64
    n_blocks: int = 3
    dropout: float = 0.3
    learning_rate: float = 1e-3
    iterations: int = 20000
    batch_size: int = 1024
    velocity_head: bool = True
    stratify_bins: int = 10
    val_every: int = 500


@dataclass
class NeuralSurrogate:
    params: MLPParams
    standardizer: Standardizer
    train_loss: float = float("nan")
    val_loss: float = float("nan")

    def sample(self, salients: list[SalientVector],
               rng: np.random.Generator) -> list[Detection]:
        return ns_sample(self.params, self.standardizer, salients, rng)

    def detect_probability(self, salients: list[SalientVector]) -> np.ndarray:
        x = self.standardizer.apply(feature_matrix(salients))
        return stable_sigmoid(ns_forward(self.params, x)[:, 0])


def _dataset_loss(params: MLPParams, std: Standardizer,
                  ds: TupleDataset) -> float:
    x = std.apply(ds.features)
    out = ns_forward(params, x, mode="eval")
    vel = ds.vel_err if params.velocity_head else None
    return ns_loss(out, ds.detected, ds.pos_err, vel, params.velocity_head)


def train_ns(train_ds: TupleDataset, val_ds: TupleDataset,
             hyper: NSHyperparams,
             rng: np.random.Generator) -> NeuralSurrogate:
    """Minibatch Adam on the surrogate likelihood with distance-stratified
    sampling; returns the parameters with the best validation loss."""
    if len(train_ds) == 0:
        raise ValueError("empty training set")
    std = Standardizer.fit(train_ds.features)
    x_train = std.apply(train_ds.features)
    params = init_mlp(x_train.shape[1], hyper.width, hyper.n_blocks,
                      hyper.dropout, hyper.velocity_head, rng)
    state = AdamState.for_params(params.arrays)
    weights = stratified_weights(train_ds.distance, hyper.stratify_bins)
    vel = train_ds.vel_err if hyper.velocity_head else None

    best_params = params.copy()
    best_val = _dataset_loss(params, std, val_ds) if len(val_ds) else np.inf
    batch = min(hyper.batch_size, len(train_ds))
    last_train = np.nan
    for it in range(1, hyper.iterations + 1):
        idx = rng.choice(len(train_ds), size=batch, replace=True, p=weights)
        loss, grads = ns_backward(
            params, x_train[idx], train_ds.detected[idx],
            train_ds.pos_err[idx], vel[idx] if vel is not None else None,
            mode="train", rng=rng)
        adam_step(params.arrays, grads, state, hyper.learning_rate)
        last_train = loss
        if len(val_ds) and (it % hyper.val_every == 0
                            or it == hyper.iterations):
            val = _dataset_loss(params, std, val_ds)
            if val < best_val:
                best_val = val
                best_params = params.copy()
    if not len(val_ds):
        best_params, best_val = params, _dataset_loss(params, std, train_ds)
    return NeuralSurrogate(best_params, std, float(last_train),
                           float(best_val))


def ns_sample(params: MLPParams, standardizer: Standardizer,
              salients: list[SalientVector],
              rng: np.random.Generator) -> list[Detection]:
    """Draw surrogate detections for one frame.

    The network predicts the detector's error, so sampled offsets are
    added back onto the ground-truth position (and velocity); extent is
    passed through.
    """
    if not salients:
        return []
    x = standardizer.apply(feature_matrix(salients))
    out = ns_forward(params, x, mode="eval")
    logit, mu_p, ls_p, mu_v, ls_v = split_heads(out, params.velocity_head)
    p_det = stable_sigmoid(logit)
    n = len(salients)
    flips = rng.random(n)
    pos_off = mu_p + np.exp(ls_p) * rng.standard_normal((n, 2))
    if params.velocity_head:
        vel_off = mu_v + np.exp(ls_v) * rng.standard_normal((n, 2))
    else:
        vel_off = np.zeros((n, 2))
    dets = []
    for i, sv in enumerate(salients):
        if flips[i] < p_det[i]:
            vx, vy = sv.velocity_ego_frame()
            dets.append(Detection(
                sv.actor_id, True,
                (sv.rel_position[0] + pos_off[i, 0],
                 sv.rel_position[1] + pos_off[i, 1]),
                (vx + vel_off[i, 0], vy + vel_off[i, 1]),
                sv.extent))
        else:
            dets.append(Detection(sv.actor_id, False))
    return dets
