"""Fully-connected network with residual skip blocks, trained by hand.

Forward, loss, reverse-mode gradients and the Adam update are all written
against plain numpy arrays so the whole training path is self-contained
and finite-difference checkable.

Layout: input projection -> K skip blocks -> linear head layer. Each skip
block computes relu(W2 relu(W1 h + b1) + b2 + h); inverted dropout sits
between consecutive blocks and is active only in train mode.

Head columns: [detect_logit, mu_x, mu_y, logsig_x, logsig_y] and, when the
velocity head is enabled, [mu_vx, mu_vy, logsig_vx, logsig_vy] appended.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class MLPParams:
    arrays: dict[str, np.ndarray]
    n_blocks: int
    dropout: float
    velocity_head: bool

    @property
    def in_dim(self) -> int:
        return self.arrays["w_in"].shape[0]

    @property
    def width(self) -> int:
        return self.arrays["w_in"].shape[1]

    @property
    def out_dim(self) -> int:
        return self.arrays["w_out"].shape[1]

    def copy(self) -> "MLPParams":
        return MLPParams({k: v.copy() for k, v in self.arrays.items()},
                         self.n_blocks, self.dropout, self.velocity_head)


def head_dim(velocity_head: bool) -> int:
    return 9 if velocity_head else 5


def stable_sigmoid(z: np.ndarray) -> np.ndarray:
    """Logistic function without overflow for large |z|."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def init_mlp(in_dim: int, width: int, n_blocks: int, dropout: float,
             velocity_head: bool, rng: np.random.Generator) -> MLPParams:
    """He-initialized weights; the head layer starts small so the network
    begins near p_det=0.5, mu=0, sigma=1."""
    if not (0.0 <= dropout < 1.0):
        raise ValueError("dropout must lie in [0, 1)")
    arrays: dict[str, np.ndarray] = {}
    arrays["w_in"] = rng.normal(0.0, math.sqrt(2.0 / in_dim), (in_dim, width))
    arrays["b_in"] = np.zeros(width)
    he = math.sqrt(2.0 / width)
    for k in range(n_blocks):
        arrays[f"w1_{k}"] = rng.normal(0.0, he, (width, width))
        arrays[f"b1_{k}"] = np.zeros(width)
        arrays[f"w2_{k}"] = rng.normal(0.0, he, (width, width))
        arrays[f"b2_{k}"] = np.zeros(width)
    out = head_dim(velocity_head)
    arrays["w_out"] = rng.normal(0.0, 0.01, (width, out))
    arrays["b_out"] = np.zeros(out)
    return MLPParams(arrays, n_blocks, dropout, velocity_head)


def _forward_cached(params: MLPParams, x: np.ndarray, mode: str,
                    rng: np.random.Generator | None):
    if x.ndim != 2 or x.shape[1] != params.in_dim:
        raise ValueError(
            f"input must be (n, {params.in_dim}), got {x.shape}")
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    train = mode == "train"
    if train and params.dropout > 0.0 and rng is None:
        raise ValueError("train mode with dropout needs an rng")

    a = params.arrays
    cache: dict = {"x": x, "blocks": []}
    z_in = x @ a["w_in"] + a["b_in"]
    h = np.maximum(z_in, 0.0)
    cache["z_in"] = z_in

    keep = 1.0 - params.dropout
    for k in range(params.n_blocks):
        h_in = h
        a_pre = h_in @ a[f"w1_{k}"] + a[f"b1_{k}"]
        act = np.maximum(a_pre, 0.0)
        z = act @ a[f"w2_{k}"] + a[f"b2_{k}"]
        h_pre = z + h_in
        h = np.maximum(h_pre, 0.0)
        mask = None
        if k < params.n_blocks - 1 and train and params.dropout > 0.0:
            mask = (rng.random(h.shape) < keep) / keep
            h = h * mask
        cache["blocks"].append((h_in, a_pre, act, h_pre, mask))
    y = h @ a["w_out"] + a["b_out"]
    cache["h_last"] = h
    return y, cache


def ns_forward(params: MLPParams, x: np.ndarray, mode: str = "eval",
               rng: np.random.Generator | None = None) -> np.ndarray:
    """Network outputs for a batch, shape (n, out_dim)."""
    y, _ = _forward_cached(params, x, mode, rng)
    return y


def split_heads(outputs: np.ndarray, velocity_head: bool):
    logit = outputs[:, 0]
    mu_pos = outputs[:, 1:3]
    logsig_pos = outputs[:, 3:5]
    if velocity_head:
        return logit, mu_pos, logsig_pos, outputs[:, 5:7], outputs[:, 7:9]
    return logit, mu_pos, logsig_pos, None, None


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _gauss_nll(target: np.ndarray, mu: np.ndarray,
               logsig: np.ndarray) -> np.ndarray:
    resid = (target - mu) * np.exp(-logsig)
    return 0.5 * resid ** 2 + logsig + 0.5 * LOG_2PI


def ns_loss(outputs: np.ndarray, detected: np.ndarray,
            pos_err: np.ndarray, vel_err: np.ndarray | None = None,
            velocity_head: bool | None = None) -> float:
    """Mean per-row negative log-likelihood of the detection targets.

    Each row contributes the Bernoulli term for its detected flag plus,
    for detected rows only, an independent Gaussian term per position
    (and optionally velocity) axis.
    """
    if velocity_head is None:
        velocity_head = outputs.shape[1] == 9
    logit, mu_p, ls_p, mu_v, ls_v = split_heads(outputs, velocity_head)
    det = detected.astype(float)
    bce = _softplus(logit) - logit * det
    per_row = bce
    gauss = _gauss_nll(pos_err, mu_p, ls_p).sum(axis=1)
    if velocity_head:
        if vel_err is None:
            raise ValueError("velocity targets required with velocity head")
        gauss = gauss + _gauss_nll(vel_err, mu_v, ls_v).sum(axis=1)
    per_row = per_row + det * gauss
    return float(per_row.mean())


def _loss_grad_outputs(outputs: np.ndarray, detected: np.ndarray,
                       pos_err: np.ndarray, vel_err: np.ndarray | None,
                       velocity_head: bool) -> np.ndarray:
    n = outputs.shape[0]
    det = detected.astype(float)
    grad = np.zeros_like(outputs)
    logit, mu_p, ls_p, mu_v, ls_v = split_heads(outputs, velocity_head)
    grad[:, 0] = 1.0 / (1.0 + np.exp(-logit)) - det

    def gauss_grads(target, mu, logsig):
        inv_var = np.exp(-2.0 * logsig)
        d_mu = (mu - target) * inv_var
        d_ls = 1.0 - (target - mu) ** 2 * inv_var
        return d_mu, d_ls

    d_mu, d_ls = gauss_grads(pos_err, mu_p, ls_p)
    grad[:, 1:3] = det[:, None] * d_mu
    grad[:, 3:5] = det[:, None] * d_ls
    if velocity_head:
        d_mu_v, d_ls_v = gauss_grads(vel_err, mu_v, ls_v)
        grad[:, 5:7] = det[:, None] * d_mu_v
        grad[:, 7:9] = det[:, None] * d_ls_v
    return grad / n


def ns_backward(params: MLPParams, x: np.ndarray, detected: np.ndarray,
                pos_err: np.ndarray, vel_err: np.ndarray | None = None,
                mode: str = "eval", rng: np.random.Generator | None = None):
    """Loss and gradients of the mean batch loss for every parameter.

    The forward pass is run once; in train mode the dropout masks drawn
    here are the ones differentiated through.
    """
    outputs, cache = _forward_cached(params, x, mode, rng)
    loss = ns_loss(outputs, detected, pos_err, vel_err,
                   params.velocity_head)
    g_out = _loss_grad_outputs(outputs, detected, pos_err, vel_err,
                               params.velocity_head)

    a = params.arrays
    grads: dict[str, np.ndarray] = {}
    h_last = cache["h_last"]
    grads["w_out"] = h_last.T @ g_out
    grads["b_out"] = g_out.sum(axis=0)
    gh = g_out @ a["w_out"].T

    for k in reversed(range(params.n_blocks)):
        h_in, a_pre, act, h_pre, mask = cache["blocks"][k]
        if mask is not None:
            gh = gh * mask
        gh_pre = gh * (h_pre > 0.0)
        grads[f"w2_{k}"] = act.T @ gh_pre
        grads[f"b2_{k}"] = gh_pre.sum(axis=0)
        g_act = gh_pre @ a[f"w2_{k}"].T
        g_apre = g_act * (a_pre > 0.0)
        grads[f"w1_{k}"] = h_in.T @ g_apre
        grads[f"b1_{k}"] = g_apre.sum(axis=0)
        gh = gh_pre + g_apre @ a[f"w1_{k}"].T

    g_zin = gh * (cache["z_in"] > 0.0)
    grads["w_in"] = cache["x"].T @ g_zin
    grads["b_in"] = g_zin.sum(axis=0)
    return loss, grads


# --- Adam -----------------------------------------------------------------

@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_params(cls, arrays: dict[str, np.ndarray]) -> "AdamState":
        return cls({k: np.zeros_like(a) for k, a in arrays.items()},
                   {k: np.zeros_like(a) for k, a in arrays.items()}, 0)


def adam_step(arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One in-place Adam update with bias correction."""
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for name, g in grads.items():
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        arrays[name] -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
