"""Trainable perception surrogates and their baselines."""

from .baselines import (GFParams, LRParams, fit_gf, fit_student_t, focal_loss,
                        focal_loss_grad, gf_sample, gt_passthrough, lr_apply,
                        lr_probability, student_t_nll, train_lr_focal)
from .data import TupleDataset
from .features import FEATURE_NAMES, Standardizer, feature_matrix, feature_vector
from .mlp import (AdamState, MLPParams, adam_step, head_dim, init_mlp,
                  ns_backward, ns_forward, ns_loss, split_heads)
from .neural import NeuralSurrogate, NSHyperparams, ns_sample, train_ns
from .sampling import stratified_sampler, stratified_weights
from .serialize import load_model, save_gf, save_lr, save_ns

__all__ = [
    "AdamState", "FEATURE_NAMES", "GFParams", "LRParams", "MLPParams",
    "NSHyperparams", "NeuralSurrogate", "Standardizer", "TupleDataset",
    "adam_step", "feature_matrix", "feature_vector", "fit_gf",
    "fit_student_t", "focal_loss", "focal_loss_grad", "gf_sample",
    "gt_passthrough", "head_dim", "init_mlp", "load_model", "lr_apply",
    "lr_probability", "ns_backward", "ns_forward", "ns_loss", "ns_sample",
    "save_gf", "save_lr", "save_ns", "split_heads", "stratified_sampler",
    "stratified_weights", "student_t_nll", "train_lr_focal", "train_ns",
]
