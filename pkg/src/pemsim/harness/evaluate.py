"""Model-level evaluation on a stored dataset.

Surrogates are sampled once per row exactly as they are in closed loop,
then scored both against ground truth (reference = actor present) and
against the detector (reference = the stored detected flag). Metrics are
restricted to rows within the range cutoff, with a per-distance-bin
breakdown.
"""

from __future__ import annotations

import numpy as np

from ..metrics import RANGE_CUTOFF, classification_metrics, sp_mse
from ..surrogates import TupleDataset, gf_sample, gt_passthrough, lr_apply
from ..surrogates.features import salient_from_features


def sample_rows(kind: str, model, dataset: TupleDataset,
                rng: np.random.Generator):
    """Sample surrogate outputs for every dataset row.

    Returns (flags, pos_err) where pos_err holds each sampled detection's
    position error against ground truth (zero rows where undetected or
    exact by construction).
    """
    salients = [salient_from_features(dataset.features[i],
                                      int(dataset.actor_id[i]))
                for i in range(len(dataset))]
    if kind == "ns":
        dets = model.sample(salients, rng)
    elif kind == "lr":
        params, std = model
        dets = lr_apply(salients, params, std, rng)
    elif kind == "gf":
        dets = gf_sample(salients, model, rng)
    elif kind == "gt":
        dets = gt_passthrough(salients)
    else:
        raise ValueError(f"unknown surrogate kind {kind!r}")
    flags = np.array([d.detected for d in dets], dtype=bool)
    pos_err = np.zeros((len(dets), 2))
    for i, (d, sv) in enumerate(zip(dets, salients)):
        if d.detected:
            pos_err[i] = (d.position[0] - sv.rel_position[0],
                          d.position[1] - sv.rel_position[1])
    return flags, pos_err


def _bin_report(pred: np.ndarray, ref: np.ndarray, dist: np.ndarray,
                width: float = 10.0) -> list[dict]:
    out = []
    edges = np.arange(0.0, RANGE_CUTOFF + width, width)
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (dist >= lo) & (dist < hi)
        if not np.any(mask):
            out.append({"lo": lo, "hi": hi, "rows": 0})
            continue
        counts = classification_metrics(pred[mask], ref[mask], dist[mask],
                                        max_range=RANGE_CUTOFF)
        out.append({"lo": lo, "hi": hi, "rows": int(mask.sum()),
                    "accuracy": counts.accuracy, "recall": counts.recall,
                    "precision": counts.precision})
    return out


def eval_model(kind: str, model, test_ds: TupleDataset, seed: int = 0) -> dict:
    """Score one surrogate against ground truth and against the detector."""
    if len(test_ds) == 0:
        raise ValueError("empty test dataset")
    rng = np.random.default_rng(seed)
    flags, pos_err = sample_rows(kind, model, test_ds, rng)
    gt_ref = np.ones(len(test_ds), dtype=bool)
    det_ref = test_ds.detected > 0.5
    dist = test_ds.distance

    vs_gt = classification_metrics(flags, gt_ref, dist)
    vs_det = classification_metrics(flags, det_ref, dist)
    in_range_detected = flags & (dist <= RANGE_CUTOFF)
    spmse = (sp_mse(pos_err[in_range_detected], dist[in_range_detected])
             if np.any(in_range_detected) else float("nan"))
    report = {
        "kind": kind,
        "rows": int(len(test_ds)),
        "vs_gt": {"precision": vs_gt.precision, "recall": vs_gt.recall,
                  "accuracy": vs_gt.accuracy, "spmse": spmse},
        "vs_detector": {"precision": vs_det.precision,
                        "recall": vs_det.recall,
                        "accuracy": vs_det.accuracy},
        "bins_vs_detector": _bin_report(flags, det_ref, dist),
    }
    return report


def eval_detector(test_ds: TupleDataset) -> dict:
    """The detector's own stored outcomes scored against ground truth."""
    det_flags = test_ds.detected > 0.5
    gt_ref = np.ones(len(test_ds), dtype=bool)
    dist = test_ds.distance
    vs_gt = classification_metrics(det_flags, gt_ref, dist)
    in_range = det_flags & (dist <= RANGE_CUTOFF)
    spmse = (sp_mse(test_ds.pos_err[in_range], dist[in_range])
             if np.any(in_range) else float("nan"))
    return {"kind": "detector",
            "vs_gt": {"precision": vs_gt.precision, "recall": vs_gt.recall,
                      "accuracy": vs_gt.accuracy, "spmse": spmse}}
