"""Downstream planners consuming detections: a longitudinal cruise
controller and a route-following agent with emergency braking.

Both planners only ever react to detections flagged as detected, so a
missed detection translates directly into delayed braking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .detector import Detection
from .geometry import Pose2D

LOOKAHEAD = 50.0  # m, matches the model-level metric range cutoff


@dataclass(frozen=True)
class ControlCommand:
    throttle: float
    brake: float
    steer: float = 0.0

    def __post_init__(self):
        if self.throttle > 0.0 and self.brake > 0.0:
            raise ValueError("throttle and brake are mutually exclusive")

    def as_tuple(self) -> tuple[float, float, float]:
        return self.throttle, self.brake, self.steer


@dataclass
class PIDState:
    integral: float = 0.0
    prev_error: float = 0.0


@dataclass(frozen=True)
class PIDGains:
    kp: float = 0.8
    ki: float = 0.05
    kd: float = 0.1
    integral_limit: float = 2.0


def pid_control(target_speed: float, current_speed: float, state: PIDState,
                gains: PIDGains, dt: float) -> tuple[float, float]:
    """Speed-error PID with integral clamping.

    Positive output maps to throttle, negative to brake, both clipped
    to [0, 1].
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    error = target_speed - current_speed
    state.integral = min(max(state.integral + error * dt,
                             -gains.integral_limit), gains.integral_limit)
    derivative = (error - state.prev_error) / dt
    state.prev_error = error
    out = gains.kp * error + gains.ki * state.integral + gains.kd * derivative
    if out >= 0.0:
        return min(out, 1.0), 0.0
    return 0.0, min(-out, 1.0)


@dataclass(frozen=True)
class AccConfig:
    max_speed: float = 10.0
    headway: float = 5.0          # m, desired standstill gap
    gap_gain: float = 0.35        # (m/s) per metre of surplus gap
    emergency_gap: float = 0.1    # m, bumper distance forcing full brake
    slow_margin: float = 0.25     # m/s below max_speed counts as slow
    lane_width: float = 3.5
    ego_half_length: float = 2.25
    gains: PIDGains = PIDGains()


@dataclass(frozen=True)
class PlannerInput:
    """Everything a planner sees for one frame; detections in ego frame."""
    ego_pose: Pose2D
    ego_speed: float
    detections: tuple[Detection, ...]
    route: tuple[tuple[float, float], ...] = ()
    route_progress: float = 0.0


def _lead_vehicle(inp: PlannerInput, cfg: AccConfig) -> Detection | None:
    """Nearest detected slow vehicle ahead in ego's lane."""
    best = None
    for det in inp.detections:
        if not det.detected:
            continue
        x, y = det.position
        if x <= 0.0 or x > LOOKAHEAD:
            continue
        if abs(y) >= cfg.lane_width / 2.0:
            continue
        if det.velocity[0] >= cfg.max_speed - cfg.slow_margin:
            continue
        if best is None or x < best.position[0]:
            best = det
    return best


def acc_plan(inp: PlannerInput, cfg: AccConfig, pid: PIDState,
             dt: float) -> ControlCommand:
    """Cruise at max speed; fall in behind a slower same-lane vehicle with
    distance-proportional speed reduction; brake fully when nearly
    touching."""
    lead = _lead_vehicle(inp, cfg)
    if lead is None:
        target = cfg.max_speed
    else:
        gap = (lead.position[0] - cfg.ego_half_length
               - 0.5 * lead.extent[0])
        if gap < cfg.emergency_gap:
            return ControlCommand(0.0, 1.0, 0.0)
        lead_speed = max(lead.velocity[0], 0.0)
        target = min(cfg.max_speed,
                     max(0.0, lead_speed + cfg.gap_gain * (gap - cfg.headway)))
    throttle, brake = pid_control(target, inp.ego_speed, pid, cfg.gains, dt)
    return ControlCommand(throttle, brake, 0.0)


@dataclass(frozen=True)
class BasicAgentConfig:
    cruise_speed: float = 10.0
    junction_speed: float = 4.0
    junction_zone: float = 12.0        # slow this far before a junction
    brake_box_length: float = 14.0     # frontal rectangle length
    pedestrian_radius: float = 9.0     # frontal semicircle
    lane_width: float = 3.5
    steer_lookahead: float = 6.0
    wheelbase: float = 2.8
    steer_angle_max: float = 0.5
    junctions: tuple[float, ...] = ()  # arc-length positions along route
    gains: PIDGains = PIDGains()


def _route_point(route, s: float) -> tuple[float, float]:
    """Point at arc length s along a polyline (clamped to its ends)."""
    if s <= 0.0:
        return route[0]
    acc = 0.0
    for i in range(len(route) - 1):
        ax, ay = route[i]
        bx, by = route[i + 1]
        seg = math.hypot(bx - ax, by - ay)
        if acc + seg >= s:
            f = (s - acc) / seg
            return ax + f * (bx - ax), ay + f * (by - ay)
        acc += seg
    return route[-1]


def route_length(route) -> float:
    return sum(math.hypot(route[i + 1][0] - route[i][0],
                          route[i + 1][1] - route[i][1])
               for i in range(len(route) - 1))


def _corner_in_front_box(det: Detection, cfg: BasicAgentConfig) -> bool:
    """Any corner of the (axis-aligned, ego frame) detected box inside the
    lane-width rectangle directly ahead of ego."""
    hx, hy = 0.5 * det.extent[0], 0.5 * det.extent[1]
    cx, cy = det.position
    for sx in (-hx, hx):
        for sy in (-hy, hy):
            x, y = cx + sx, cy + sy
            if 0.0 < x < cfg.brake_box_length and abs(y) < cfg.lane_width / 2.0:
                return True
    return False


def basic_agent_plan(inp: PlannerInput, cfg: BasicAgentConfig, pid: PIDState,
                     dt: float) -> ControlCommand:
    """Pure-pursuit route following with emergency braking.

    Brakes fully when a detected vehicle corner enters the frontal lane
    rectangle or a detected pedestrian enters the frontal semicircle;
    slows down near junction positions along the route.
    """
    if not inp.route:
        raise ValueError("basic agent requires a route")
    if inp.route_progress >= route_length(inp.route) - 0.5:
        _, brake = pid_control(0.0, inp.ego_speed, pid, cfg.gains, dt)
        return ControlCommand(0.0, max(brake, 0.3), 0.0)

    for det in inp.detections:
        if not det.detected:
            continue
        is_pedestrian = det.extent[0] < 1.0  # pedestrians are sub-metre boxes
        x, y = det.position
        if is_pedestrian:
            if x > 0.0 and math.hypot(x, y) < cfg.pedestrian_radius:
                return ControlCommand(0.0, 1.0, 0.0)
        elif _corner_in_front_box(det, cfg):
            return ControlCommand(0.0, 1.0, 0.0)

    target_speed = cfg.cruise_speed
    for junction_s in cfg.junctions:
        if 0.0 <= junction_s - inp.route_progress <= cfg.junction_zone:
            target_speed = cfg.junction_speed
            break

    # pure pursuit toward a point steer_lookahead ahead along the route
    tx, ty = _route_point(inp.route, inp.route_progress + cfg.steer_lookahead)
    lx, ly = inp.ego_pose.transform_to_frame(tx, ty)
    ld2 = lx * lx + ly * ly
    steer = 0.0
    if ld2 > 1e-6:
        curvature = 2.0 * ly / ld2
        steer = math.atan(curvature * cfg.wheelbase) / cfg.steer_angle_max
        steer = min(max(steer, -1.0), 1.0)
    throttle, brake = pid_control(target_speed, inp.ego_speed, pid,
                                  cfg.gains, dt)
    return ControlCommand(throttle, brake, steer)
