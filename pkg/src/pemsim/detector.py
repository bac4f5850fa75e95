"""Synthetic stand-in for an object detector plus velocity tracking.

The detection process is generative and fully known: the probability of
detecting an actor is a logistic function of its distance, occlusion and
optionally their product, and detected positions carry Gaussian noise
whose standard deviation grows linearly with distance. A constant-velocity
Kalman filter over the detected positions supplies velocity estimates,
mirroring how velocities come out of a real detection-plus-tracking stack.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .geometry import rotate
from .scene import SalientVector


@dataclass(frozen=True)
class Detection:
    """Detector (or surrogate) output for one ground-truth actor.

    `actor_id` keeps the generative association for bookkeeping; training
    tuples are still built through geometric matching. Position and
    velocity are in the ego frame and only meaningful when detected.
    """

    actor_id: int
    detected: bool
    position: tuple[float, float] = (0.0, 0.0)
    velocity: tuple[float, float] = (0.0, 0.0)
    extent: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class DetectorProfile:
    """Parameters of the synthetic detection process.

    Detection probability: logistic(intercept + distance_coeff*d
    + occlusion_coeff*occ + distance_occlusion_coeff*d*occ).
    Positional noise per axis: sigma(d) = sigma0 + sigma1*d.
    `frame_sleep` optionally pads each call to emulate an expensive
    backbone for timing experiments.
    """

    intercept: float = 4.0
    distance_coeff: float = -0.08
    occlusion_coeff: float = -6.0
    distance_occlusion_coeff: float = 0.0
    sigma0: float = 0.2
    sigma1: float = 0.005
    kalman_meas_noise: float = 0.3
    seed: int = 0
    frame_sleep: float = 0.0

    def __post_init__(self):
        if self.sigma0 <= 0.0:
            raise ValueError("sigma0 must be positive")
        if self.sigma1 < 0.0:
            raise ValueError("sigma1 must be non-negative")

    def detect_logit(self, distance: float, occlusion: float) -> float:
        return (self.intercept + self.distance_coeff * distance
                + self.occlusion_coeff * occlusion
                + self.distance_occlusion_coeff * distance * occlusion)

    def detect_probability(self, distance, occlusion):
        """Closed-form detection probability; accepts scalars or arrays."""
        raw = (self.intercept + self.distance_coeff * np.asarray(distance)
               + self.occlusion_coeff * np.asarray(occlusion)
               + self.distance_occlusion_coeff
               * np.asarray(distance) * np.asarray(occlusion))
        scalar = np.ndim(raw) == 0
        logit = np.atleast_1d(raw).astype(float)
        out = np.empty_like(logit)
        pos = logit >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-logit[pos]))
        ez = np.exp(logit[~pos])
        out[~pos] = ez / (1.0 + ez)
        return float(out[0]) if scalar else out

    def position_sigma(self, distance: float) -> float:
        return self.sigma0 + self.sigma1 * distance


def detect(salients: list[SalientVector], profile: DetectorProfile,
           rng: np.random.Generator) -> list[Detection]:
    """Draw one frame of detections from the synthetic process.

    No false positives are generated: every output corresponds to a real
    actor, detected or not.
    """
    if profile.frame_sleep > 0.0:
        time.sleep(profile.frame_sleep)
    out = []
    for sv in salients:
        p = profile.detect_probability(sv.distance, sv.occlusion)
        if rng.random() < p:
            sigma = profile.position_sigma(sv.distance)
            noise = rng.normal(0.0, sigma, size=2)
            pos = (sv.rel_position[0] + float(noise[0]),
                   sv.rel_position[1] + float(noise[1]))
            out.append(Detection(sv.actor_id, True, pos,
                                 velocity=(0.0, 0.0), extent=sv.extent))
        else:
            out.append(Detection(sv.actor_id, False))
    return out


# --- constant-velocity Kalman filter -------------------------------------

TRACK_DROP_MISSES = 5          # consecutive missed frames before a track dies
PROCESS_ACCEL_STD = 2.0        # m/s^2 white-acceleration process noise
INITIAL_POS_VAR = 1.0
INITIAL_VEL_VAR = 25.0

_H = np.array([[1.0, 0.0, 0.0, 0.0],
               [0.0, 1.0, 0.0, 0.0]])


@dataclass(frozen=True)
class KalmanTrack:
    """State (x, y, vx, vy) with covariance, timestamped."""

    mean: np.ndarray
    covariance: np.ndarray
    last_update: float
    actor_id: int

    def velocity(self) -> tuple[float, float]:
        return float(self.mean[2]), float(self.mean[3])


def _check_psd(cov: np.ndarray) -> None:
    if not np.allclose(cov, cov.T, atol=1e-8):
        raise ValueError("covariance must be symmetric")
    eigvals = np.linalg.eigvalsh(cov)
    if eigvals.min() < -1e-8:
        raise ValueError("covariance must be positive semi-definite")


def new_track(actor_id: int, position: tuple[float, float],
              t: float) -> KalmanTrack:
    mean = np.array([position[0], position[1], 0.0, 0.0])
    cov = np.diag([INITIAL_POS_VAR, INITIAL_POS_VAR,
                   INITIAL_VEL_VAR, INITIAL_VEL_VAR])
    return KalmanTrack(mean, cov, t, actor_id)


def kalman_predict(track: KalmanTrack, dt: float,
                   accel_std: float = PROCESS_ACCEL_STD) -> KalmanTrack:
    if dt < 0.0:
        raise ValueError("dt must be non-negative")
    _check_psd(track.covariance)
    if dt == 0.0:
        return track
    F = np.array([[1.0, 0.0, dt, 0.0],
                  [0.0, 1.0, 0.0, dt],
                  [0.0, 0.0, 1.0, 0.0],
                  [0.0, 0.0, 0.0, 1.0]])
    q = accel_std ** 2
    dt2, dt3, dt4 = dt * dt, dt ** 3, dt ** 4
    Q = q * np.array([[dt4 / 4, 0.0, dt3 / 2, 0.0],
                      [0.0, dt4 / 4, 0.0, dt3 / 2],
                      [dt3 / 2, 0.0, dt2, 0.0],
                      [0.0, dt3 / 2, 0.0, dt2]])
    mean = F @ track.mean
    cov = F @ track.covariance @ F.T + Q
    cov = 0.5 * (cov + cov.T)
    return replace(track, mean=mean, covariance=cov,
                   last_update=track.last_update + dt)


def kalman_update(track: KalmanTrack, position: tuple[float, float],
                  meas_var: float) -> KalmanTrack:
    if meas_var <= 0.0:
        raise ValueError("measurement variance must be positive")
    _check_psd(track.covariance)
    R = meas_var * np.eye(2)
    z = np.array(position)
    y = z - _H @ track.mean
    S = _H @ track.covariance @ _H.T + R
    K = track.covariance @ _H.T @ np.linalg.inv(S)
    mean = track.mean + K @ y
    # Joseph form keeps the covariance symmetric PSD
    A = np.eye(4) - K @ _H
    cov = A @ track.covariance @ A.T + K @ R @ K.T
    cov = 0.5 * (cov + cov.T)
    return replace(track, mean=mean, covariance=cov)


class VelocityTracker:
    """Maintains one Kalman track per actor across frames.

    Positions are tracked in the world frame (the simulator knows the ego
    pose), so estimated velocities are world velocities; they are rotated
    back into the ego frame when attached to detections. A track is
    dropped and later re-initialized after TRACK_DROP_MISSES consecutive
    missed frames.
    """

    def __init__(self, meas_noise: float = 0.3,
                 drop_after: int = TRACK_DROP_MISSES):
        self.meas_var = meas_noise ** 2
        self.drop_after = drop_after
        self.tracks: dict[int, KalmanTrack] = {}
        self.misses: dict[int, int] = {}

    def step(self, detections: list[Detection], ego_pose, t: float,
             dt: float) -> list[Detection]:
        """Update tracks with one frame and attach velocity estimates."""
        out = []
        seen = set()
        for det in detections:
            if not det.detected:
                out.append(det)
                continue
            seen.add(det.actor_id)
            world_pos = ego_pose.transform_from_frame(*det.position)
            track = self.tracks.get(det.actor_id)
            if track is None:
                track = new_track(det.actor_id, world_pos, t)
            else:
                track = kalman_predict(track, t - track.last_update)
                track = kalman_update(track, world_pos, self.meas_var)
            self.tracks[det.actor_id] = track
            self.misses[det.actor_id] = 0
            vx, vy = track.velocity()
            vel_ego = rotate(vx, vy, -ego_pose.yaw)
            out.append(replace(det, velocity=vel_ego))
        for actor_id in list(self.tracks):
            if actor_id in seen:
                continue
            self.misses[actor_id] = self.misses.get(actor_id, 0) + 1
            if self.misses[actor_id] > self.drop_after:
                del self.tracks[actor_id]
                del self.misses[actor_id]
        return out


def track_and_attach_velocity(frames: list[list[Detection]],
                              ego_poses: list, dt: float,
                              meas_noise: float = 0.3) -> list[list[Detection]]:
    """Run the velocity tracker over a time-ordered sequence of frames."""
    tracker = VelocityTracker(meas_noise=meas_noise)
    out = []
    for k, dets in enumerate(frames):
        out.append(tracker.step(dets, ego_poses[k], k * dt, dt))
    return out
