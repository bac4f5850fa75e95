"""Training-tuple dataset container.

One row per (frame, actor): flattened salient features plus the matched
detector outcome. Position/velocity targets are the detector's error
relative to ground truth and are zero-filled (and masked) on missed rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FEATURE_NAMES


@dataclass
class TupleDataset:
    features: np.ndarray   # (n, F) raw salient features
    detected: np.ndarray   # (n,) 0/1
    pos_err: np.ndarray    # (n, 2) detected position - true position
    vel_err: np.ndarray    # (n, 2) tracked velocity - true velocity
    distance: np.ndarray   # (n,)
    scenario: np.ndarray   # (n,) scenario index the row came from
    frame: np.ndarray      # (n,)
    actor_id: np.ndarray   # (n,)

    def __post_init__(self):
        n = len(self.detected)
        if self.features.shape != (n, len(FEATURE_NAMES)):
            raise ValueError("feature matrix shape mismatch")

    def __len__(self) -> int:
        return len(self.detected)

    def subset(self, idx: np.ndarray) -> "TupleDataset":
        return TupleDataset(self.features[idx], self.detected[idx],
                            self.pos_err[idx], self.vel_err[idx],
                            self.distance[idx], self.scenario[idx],
                            self.frame[idx], self.actor_id[idx])

    def split_by_scenario(self, train_scenarios,
                          test_scenarios) -> tuple["TupleDataset", "TupleDataset"]:
        train_mask = np.isin(self.scenario, list(train_scenarios))
        test_mask = np.isin(self.scenario, list(test_scenarios))
        return self.subset(train_mask), self.subset(test_mask)

    @classmethod
    def from_rows(cls, rows: list[dict]) -> "TupleDataset":
        n = len(rows)
        feats = np.zeros((n, len(FEATURE_NAMES)))
        det = np.zeros(n)
        pos = np.zeros((n, 2))
        vel = np.zeros((n, 2))
        dist = np.zeros(n)
        scen = np.zeros(n, dtype=int)
        frame = np.zeros(n, dtype=int)
        actor = np.zeros(n, dtype=int)
        for i, r in enumerate(rows):
            feats[i] = [r["salient"][k] for k in FEATURE_NAMES]
            t = r["target"]
            det[i] = 1.0 if t["detected"] else 0.0
            if t["detected"]:
                pos[i] = (t["dx"], t["dy"])
                vel[i] = (t["dvx"], t["dvy"])
            dist[i] = r["salient"]["distance"]
            scen[i] = r["scenario"]
            frame[i] = r["frame"]
            actor[i] = r["actor_id"]
        return cls(feats, det, pos, vel, dist, scen, frame, actor)

    def to_rows(self) -> list[dict]:
        rows = []
        for i in range(len(self)):
            salient = {k: float(self.features[i, j])
                       for j, k in enumerate(FEATURE_NAMES)}
            detected = bool(self.detected[i])
            target: dict = {"detected": detected}
            if detected:
                target.update(dx=float(self.pos_err[i, 0]),
                              dy=float(self.pos_err[i, 1]),
                              dvx=float(self.vel_err[i, 0]),
                              dvy=float(self.vel_err[i, 1]))
            rows.append({"scenario": int(self.scenario[i]),
                         "frame": int(self.frame[i]),
                         "actor_id": int(self.actor_id[i]),
                         "salient": salient,
                         "target": target})
        return rows
