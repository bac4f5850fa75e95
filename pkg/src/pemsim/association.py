"""Per-frame matching of ground-truth boxes to detections.

Matching minimises total (1 - IoU) cost with the Hungarian algorithm;
pairs at or below the IoU gate are demoted to unmatched so that spurious
long-range matches become missed detections instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import OrientedBox, clip_polygon, polygon_area


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[int, int], ...]
    unmatched_gt: tuple[int, ...]
    unmatched_det: tuple[int, ...]


def box_iou(a: OrientedBox, b: OrientedBox) -> float:
    """Exact intersection-over-union of two oriented rectangles."""
    # boxes further apart than their circumradii cannot intersect
    dx, dy = a.cx - b.cx, a.cy - b.cy
    reach = 0.5 * (math.hypot(a.length, a.width)
                   + math.hypot(b.length, b.width))
    if dx * dx + dy * dy > reach * reach:
        return 0.0
    inter = polygon_area(clip_polygon(a.corners(), b.corners()))
    union = a.area() + b.area() - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def hungarian(cost: np.ndarray) -> list[tuple[int, int]]:
    """Minimum-cost assignment of min(n, m) pairs for an n x m cost matrix.

    Shortest-augmenting-path formulation with dual potentials, O(n^2 m).
    Returns (row, col) pairs; empty input gives an empty assignment.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.size == 0:
        return []
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")

    transposed = cost.shape[0] > cost.shape[1]
    if transposed:
        cost = cost.T
    n, m = cost.shape

    INF = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    match = [0] * (m + 1)      # match[j] = row assigned to column j (1-based)
    way = [0] * (m + 1)

    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = [INF] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = INF
            j1 = -1
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1][j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1

    pairs = []
    for j in range(1, m + 1):
        if match[j] != 0:
            pairs.append((match[j] - 1, j - 1))
    if transposed:
        pairs = [(c, r) for r, c in pairs]
    return sorted(pairs)


def associate_frame(gt_boxes: list[OrientedBox],
                    det_boxes: list[OrientedBox],
                    iou_gate: float = 0.1) -> Assignment:
    """Hungarian matching on cost 1 - IoU with an IoU gate.

    Matched pairs with IoU <= iou_gate are demoted to unmatched on both
    sides.
    """
    if not (0.0 <= iou_gate < 1.0):
        raise ValueError("iou_gate must lie in [0, 1)")
    if not gt_boxes or not det_boxes:
        return Assignment((), tuple(range(len(gt_boxes))),
                          tuple(range(len(det_boxes))))

    iou = np.zeros((len(gt_boxes), len(det_boxes)))
    for i, g in enumerate(gt_boxes):
        for j, d in enumerate(det_boxes):
            iou[i, j] = box_iou(g, d)

    raw_pairs = hungarian(1.0 - iou)
    pairs = tuple(p for p in raw_pairs if iou[p[0], p[1]] > iou_gate)
    matched_gt = {p[0] for p in pairs}
    matched_det = {p[1] for p in pairs}
    return Assignment(
        pairs,
        tuple(i for i in range(len(gt_boxes)) if i not in matched_gt),
        tuple(j for j in range(len(det_boxes)) if j not in matched_det),
    )
