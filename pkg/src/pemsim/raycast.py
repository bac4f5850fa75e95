"""Occlusion fractions from a semantic 2D ray fan.

A fan of rays is cast from a sensor mounted on the ego vehicle. For each
actor, occlusion is the fraction of rays that would hit the actor in
isolation but are blocked first by another actor. Actors that no ray can
reach even in isolation (out of range or field of view) count as fully
occluded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import OrientedBox, Pose2D
from .scene import WorldState


@dataclass(frozen=True)
class RayFanConfig:
    ray_count: int = 360
    fov: float = 2.0 * math.pi
    max_range: float = 100.0
    sensor_offset: Pose2D = Pose2D(0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.ray_count < 1:
            raise ValueError("ray_count must be >= 1")
        if not (0.0 < self.fov <= 2.0 * math.pi + 1e-12):
            raise ValueError("fov must be in (0, 2*pi]")
        if self.max_range <= 0.0:
            raise ValueError("max_range must be positive")


def ray_rect_intersect(origin: tuple[float, float],
                       direction: tuple[float, float],
                       rect: OrientedBox) -> float | None:
    """Smallest non-negative ray parameter at which the ray is inside rect.

    `direction` must be a unit vector; the returned parameter is then the
    hit distance in metres. Returns None when the ray misses. An origin
    inside the rectangle yields 0.
    """
    # slab test in the rectangle's local frame
    c, s = math.cos(rect.yaw), math.sin(rect.yaw)
    ox, oy = origin[0] - rect.cx, origin[1] - rect.cy
    lo_x = c * ox + s * oy
    lo_y = -s * ox + c * oy
    ld_x = c * direction[0] + s * direction[1]
    ld_y = -s * direction[0] + c * direction[1]

    t_min, t_max = -math.inf, math.inf
    for pos, vel, half in ((lo_x, ld_x, 0.5 * rect.length),
                           (lo_y, ld_y, 0.5 * rect.width)):
        if abs(vel) < 1e-15:
            if abs(pos) > half:
                return None
            continue
        t1 = (-half - pos) / vel
        t2 = (half - pos) / vel
        if t1 > t2:
            t1, t2 = t2, t1
        t_min = max(t_min, t1)
        t_max = min(t_max, t2)
        if t_min > t_max:
            return None
    if t_max < 0.0:
        return None
    return max(t_min, 0.0)


def _fan_angles(cfg: RayFanConfig) -> np.ndarray:
    """Ray bearings relative to the sensor heading."""
    full_circle = cfg.fov >= 2.0 * math.pi - 1e-12
    if full_circle:
        return np.linspace(-math.pi, math.pi, cfg.ray_count, endpoint=False)
    if cfg.ray_count == 1:
        return np.zeros(1)
    return np.linspace(-0.5 * cfg.fov, 0.5 * cfg.fov, cfg.ray_count)


def _ray_box_distances(origins: np.ndarray, dirs: np.ndarray,
                       boxes: list[OrientedBox]) -> np.ndarray:
    """Hit distances for every (ray, box) pair, inf where a ray misses.

    Vectorized slab test over rays; `origins` is a single (2,) sensor
    position, `dirs` is (n, 2) unit vectors.
    """
    n = dirs.shape[0]
    out = np.full((n, len(boxes)), np.inf)
    for k, b in enumerate(boxes):
        c, s = math.cos(b.yaw), math.sin(b.yaw)
        rot = np.array([[c, s], [-s, c]])
        lo = rot @ np.array([origins[0] - b.cx, origins[1] - b.cy])
        ld = dirs @ rot.T
        t_min = np.full(n, -np.inf)
        t_max = np.full(n, np.inf)
        ok = np.ones(n, dtype=bool)
        for axis, half in ((0, 0.5 * b.length), (1, 0.5 * b.width)):
            vel = ld[:, axis]
            pos = lo[axis]
            parallel = np.abs(vel) < 1e-15
            ok &= ~(parallel & (abs(pos) > half))
            with np.errstate(divide="ignore", invalid="ignore"):
                t1 = (-half - pos) / vel
                t2 = (half - pos) / vel
            swap = t1 > t2
            t1s = np.where(swap, t2, t1)
            t2s = np.where(swap, t1, t2)
            t_min = np.where(parallel, t_min, np.maximum(t_min, t1s))
            t_max = np.where(parallel, t_max, np.minimum(t_max, t2s))
        ok &= (t_min <= t_max) & (t_max >= 0.0)
        hit = np.where(ok, np.maximum(t_min, 0.0), np.inf)
        out[:, k] = hit
    return out


def occlusion_fractions(state: WorldState,
                        cfg: RayFanConfig | None = None) -> dict[int, float]:
    """Occlusion fraction for every non-ego actor.

    fraction = 1 - (rays whose first hit is the actor)
                 / (rays that would hit the actor in isolation within range)
    with the convention that an actor reached by no ray in isolation is
    fully occluded. First-hit ties go to the lower actor id.
    """
    if cfg is None:
        cfg = RayFanConfig()
    actors = state.non_ego()
    if not actors:
        raise ValueError("need at least one non-ego actor")
    ego = state.ego
    sensor_x, sensor_y = ego.pose.transform_from_frame(
        cfg.sensor_offset.x, cfg.sensor_offset.y)
    sensor_yaw = ego.pose.yaw + cfg.sensor_offset.yaw

    bearings = _fan_angles(cfg) + sensor_yaw
    dirs = np.stack([np.cos(bearings), np.sin(bearings)], axis=1)
    origin = np.array([sensor_x, sensor_y])

    # actors sorted by id so argmin tie-breaking lands on the lower id
    ordered = sorted(actors, key=lambda a: a.actor_id)
    boxes = [a.box() for a in ordered]
    dist = _ray_box_distances(origin, dirs, boxes)
    dist[dist > cfg.max_range] = np.inf

    reachable = np.isfinite(dist)            # ray hits actor in isolation
    nearest = dist.min(axis=1)
    has_hit = np.isfinite(nearest)
    first = dist.argmin(axis=1)              # lowest index wins ties

    fractions: dict[int, float] = {}
    for k, a in enumerate(ordered):
        possible = int(reachable[:, k].sum())
        if possible == 0:
            fractions[a.actor_id] = 1.0
            continue
        visible = int(np.sum(has_hit & (first == k)))
        fractions[a.actor_id] = 1.0 - visible / possible
    return fractions
