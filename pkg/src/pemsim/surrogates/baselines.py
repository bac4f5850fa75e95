"""Baseline perception surrogates: logistic miss model, Gaussian fuzzer
and the ground-truth passthrough.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..detector import Detection
from ..scene import SalientVector
from .features import Standardizer, feature_matrix
from .mlp import AdamState, adam_step, stable_sigmoid

STD_FLOOR = 1e-6


# --- logistic regression with focal loss ----------------------------------

@dataclass
class LRParams:
    """Weights over standardized features with a trailing bias term."""
    weights: np.ndarray


def _log_sigmoid(z: np.ndarray) -> np.ndarray:
    return -(np.maximum(-z, 0.0) + np.log1p(np.exp(-np.abs(z))))


def focal_loss(logits: np.ndarray, targets: np.ndarray, alpha: float,
               gamma: float) -> float:
    """Mean focal loss -alpha_t (1 - p_t)^gamma log(p_t) over a batch.

    alpha_t is alpha for positive rows and (1 - alpha) for negative ones;
    p_t is the probability assigned to the true class.
    """
    y = targets.astype(float)
    log_pt = np.where(y == 1.0, _log_sigmoid(logits), _log_sigmoid(-logits))
    pt = np.exp(log_pt)
    alpha_t = np.where(y == 1.0, alpha, 1.0 - alpha)
    return float(np.mean(-alpha_t * (1.0 - pt) ** gamma * log_pt))


def focal_loss_grad(logits: np.ndarray, targets: np.ndarray, alpha: float,
                    gamma: float) -> np.ndarray:
    """d(mean focal loss)/d logits."""
    y = targets.astype(float)
    p = 1.0 / (1.0 + np.exp(-logits))
    log_p = _log_sigmoid(logits)
    log_q = _log_sigmoid(-logits)
    grad_pos = alpha * (1.0 - p) ** gamma * (gamma * p * log_p - (1.0 - p))
    grad_neg = (1.0 - alpha) * p ** gamma * (p - gamma * (1.0 - p) * log_q)
    return np.where(y == 1.0, grad_pos, grad_neg) / len(y)


def train_lr_focal(features_std: np.ndarray, detected: np.ndarray,
                   rng: np.random.Generator, alpha: float = 0.6,
                   gamma: float = 2.0, lr: float = 1e-2, iters: int = 3000,
                   batch_size: int = 2048) -> LRParams:
    """Fit the miss model by minibatch Adam on the focal loss."""
    n = len(detected)
    if n == 0:
        raise ValueError("empty training set")
    if len(np.unique(detected)) < 2:
        warnings.warn("training labels contain a single class")
    x_aug = np.concatenate([features_std, np.ones((n, 1))], axis=1)
    w = np.zeros(x_aug.shape[1])
    arrays = {"w": w}
    state = AdamState.for_params(arrays)
    batch = min(batch_size, n)
    for _ in range(iters):
        idx = rng.integers(0, n, size=batch)
        xb, yb = x_aug[idx], detected[idx]
        g_logits = focal_loss_grad(xb @ arrays["w"], yb, alpha, gamma)
        adam_step(arrays, {"w": xb.T @ g_logits}, state, lr)
    return LRParams(arrays["w"].copy())


def lr_probability(params: LRParams, features_std: np.ndarray) -> np.ndarray:
    x_aug = np.concatenate(
        [features_std, np.ones((len(features_std), 1))], axis=1)
    return stable_sigmoid(x_aug @ params.weights)


def lr_apply(salients: list[SalientVector], params: LRParams,
             standardizer: Standardizer,
             rng: np.random.Generator) -> list[Detection]:
    """Sample detected flags from the miss model; detected actors pass
    their exact coordinates through."""
    if not salients:
        return []
    probs = lr_probability(params, standardizer.apply(feature_matrix(salients)))
    draws = rng.random(len(salients))
    out = []
    for sv, p, u in zip(salients, probs, draws):
        if u < p:
            out.append(Detection(sv.actor_id, True, sv.rel_position,
                                 sv.velocity_ego_frame(), sv.extent))
        else:
            out.append(Detection(sv.actor_id, False))
    return out


# --- Gaussian fuzzer -------------------------------------------------------

@dataclass
class GFParams:
    """Per-axis position Gaussians and velocity StudentT distributions."""
    pos_mean: np.ndarray
    pos_std: np.ndarray
    vel_loc: np.ndarray
    vel_scale: np.ndarray
    vel_dof: float = 3.0


def student_t_nll(x: np.ndarray, loc: float, scale: float,
                  dof: float) -> float:
    """Mean negative log-likelihood of a location-scale StudentT."""
    z2 = ((x - loc) / scale) ** 2
    log_norm = (math.lgamma(0.5 * (dof + 1.0)) - math.lgamma(0.5 * dof)
                - 0.5 * math.log(dof * math.pi) - math.log(scale))
    return float(np.mean(-(log_norm - 0.5 * (dof + 1.0) * np.log1p(z2 / dof))))


def fit_student_t(x: np.ndarray, dof: float = 3.0, iters: int = 200,
                  tol: float = 1e-12) -> tuple[float, float]:
    """EM fixed-point fit of StudentT location and scale at fixed dof.

    Initialized at the empirical moments; each sweep is monotone in the
    likelihood.
    """
    loc = float(np.mean(x))
    scale = max(float(np.std(x)), STD_FLOOR)
    for _ in range(iters):
        z2 = ((x - loc) / scale) ** 2
        w = (dof + 1.0) / (dof + z2)
        new_loc = float(np.sum(w * x) / np.sum(w))
        new_scale = math.sqrt(
            max(float(np.mean(w * (x - new_loc) ** 2)), STD_FLOOR ** 2))
        converged = (abs(new_loc - loc) < tol
                     and abs(new_scale - scale) < tol)
        loc, scale = new_loc, new_scale
        if converged:
            break
    return loc, scale


def fit_gf(pos_err: np.ndarray, vel_err: np.ndarray,
           dof: float = 3.0) -> GFParams:
    """Closed-form Gaussian MLE for position errors; iterative StudentT
    location/scale for velocity errors.

    Both arrays hold the errors of detected rows only, shape (n, 2).
    """
    if len(pos_err) < 2:
        raise ValueError("need at least two detected rows to fit")
    pos_mean = pos_err.mean(axis=0)
    pos_std = np.maximum(pos_err.std(axis=0), STD_FLOOR)
    locs, scales = [], []
    for axis in range(2):
        loc, scale = fit_student_t(vel_err[:, axis], dof)
        locs.append(loc)
        scales.append(scale)
    return GFParams(pos_mean, pos_std, np.array(locs), np.array(scales), dof)


def gf_sample(salients: list[SalientVector], params: GFParams,
              rng: np.random.Generator) -> list[Detection]:
    """Always detect; perturb exact position and velocity by the fitted
    noise distributions."""
    if not salients:
        return []
    n = len(salients)
    pos_noise = params.pos_mean + params.pos_std * rng.standard_normal((n, 2))
    vel_noise = (params.vel_loc
                 + params.vel_scale * rng.standard_t(params.vel_dof, (n, 2)))
    out = []
    for i, sv in enumerate(salients):
        vx, vy = sv.velocity_ego_frame()
        out.append(Detection(
            sv.actor_id, True,
            (sv.rel_position[0] + pos_noise[i, 0],
             sv.rel_position[1] + pos_noise[i, 1]),
            (vx + vel_noise[i, 0], vy + vel_noise[i, 1]),
            sv.extent))
    return out


# --- ground truth ----------------------------------------------------------

def gt_passthrough(salients: list[SalientVector]) -> list[Detection]:
    return [Detection(sv.actor_id, True, sv.rel_position,
                      sv.velocity_ego_frame(), sv.extent)
            for sv in salients]
