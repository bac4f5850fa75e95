"""Flattening salient vectors into model inputs, plus standardization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..scene import SalientVector

FEATURE_NAMES = (
    "rel_x", "rel_y", "rel_yaw", "speed", "angular_velocity",
    "length", "width", "occlusion", "distance",
    "class_vehicle", "class_pedestrian",
)

STD_FLOOR = 1e-6


def feature_vector(sv: SalientVector) -> np.ndarray:
    return np.array([
        sv.rel_position[0], sv.rel_position[1], sv.rel_yaw, sv.speed,
        sv.angular_velocity, sv.extent[0], sv.extent[1], sv.occlusion,
        sv.distance, sv.class_onehot[0], sv.class_onehot[1],
    ])


def feature_matrix(salients: list[SalientVector]) -> np.ndarray:
    if not salients:
        return np.empty((0, len(FEATURE_NAMES)))
    return np.stack([feature_vector(sv) for sv in salients])


def salient_from_features(row: np.ndarray, actor_id: int = -1) -> SalientVector:
    """Inverse of feature_vector, used when replaying stored datasets."""
    return SalientVector(
        actor_id=actor_id,
        rel_position=(float(row[0]), float(row[1])),
        rel_yaw=float(row[2]),
        speed=float(row[3]),
        angular_velocity=float(row[4]),
        extent=(float(row[5]), float(row[6])),
        occlusion=float(row[7]),
        distance=float(row[8]),
        class_onehot=(float(row[9]), float(row[10])),
    )


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        """Per-feature mean/std with the std floored at STD_FLOOR."""
        if x.size == 0:
            raise ValueError("cannot standardize an empty dataset")
        mean = x.mean(axis=0)
        std = np.maximum(x.std(axis=0), STD_FLOOR)
        return cls(mean, std)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std
