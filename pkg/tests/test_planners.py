import math

import numpy as np
import pytest

from pemsim.detector import Detection
from pemsim.geometry import Pose2D
from pemsim.planners import (AccConfig, BasicAgentConfig, ControlCommand,
                             PIDGains, PIDState, PlannerInput, acc_plan,
                             basic_agent_plan, pid_control, route_length)

DT = 0.05


def vehicle_det(x, y, vx=0.0, vy=0.0, detected=True):
    return Detection(1, detected, (x, y), (vx, vy), (4.5, 2.0))


def pedestrian_det(x, y):
    return Detection(2, True, (x, y), (0.0, 0.0), (0.6, 0.6))


def acc_input(detections, speed=10.0):
    return PlannerInput(Pose2D(0, 0, 0), speed, tuple(detections))


# --- PID -----------------------------------------------------------------------

def test_pid_zero_error_zero_command():
    throttle, brake = pid_control(10.0, 10.0, PIDState(), PIDGains(), DT)
    assert throttle == 0.0 and brake == 0.0


def test_pid_p_only_step_response():
    gains = PIDGains(kp=0.3, ki=0.0, kd=0.0)
    throttle, brake = pid_control(12.0, 10.0, PIDState(), gains, DT)
    assert throttle == pytest.approx(0.3 * 2.0)
    assert brake == 0.0
    throttle, brake = pid_control(8.0, 10.0, PIDState(), gains, DT)
    assert brake == pytest.approx(0.3 * 2.0)


def test_pid_integral_clamped():
    gains = PIDGains(kp=0.0, ki=1.0, kd=0.0, integral_limit=2.0)
    state = PIDState()
    for _ in range(10000):
        pid_control(20.0, 0.0, state, gains, DT)
    assert state.integral == pytest.approx(2.0)


def test_pid_closed_loop_settles_to_target():
    # simple plant: accel = 3*throttle - 8*brake
    gains = PIDGains()
    state = PIDState()
    speed = 0.0
    target = 9.0
    for _ in range(800):
        throttle, brake = pid_control(target, speed, state, gains, DT)
        speed = max(speed + (3.0 * throttle - 8.0 * brake) * DT, 0.0)
    assert speed == pytest.approx(target, rel=0.02)


def test_pid_rejects_bad_dt():
    with pytest.raises(ValueError):
        pid_control(1.0, 0.0, PIDState(), PIDGains(), 0.0)


# --- control command -------------------------------------------------------------

def test_control_command_exclusive():
    with pytest.raises(ValueError):
        ControlCommand(0.5, 0.5, 0.0)


# --- ACC planner -------------------------------------------------------------------

def test_acc_empty_detections_accelerates():
    cfg = AccConfig()
    cmd = acc_plan(acc_input([], speed=2.0), cfg, PIDState(), DT)
    assert cmd.throttle > 0.0 and cmd.brake == 0.0


def test_acc_emergency_brake_when_nearly_touching():
    cfg = AccConfig()
    # bumper gap of 0.05 m: rel_x = gap + both half lengths
    x = 0.05 + cfg.ego_half_length + 2.25
    cmd = acc_plan(acc_input([vehicle_det(x, 0.0, vx=0.0)]), cfg, PIDState(),
                   DT)
    assert cmd.brake == 1.0 and cmd.throttle == 0.0


def test_acc_adjacent_lane_ignored():
    cfg = AccConfig()
    cmd = acc_plan(acc_input([vehicle_det(15.0, cfg.lane_width, vx=0.0)],
                             speed=cfg.max_speed * 0.5), cfg, PIDState(), DT)
    assert cmd.throttle > 0.0 and cmd.brake == 0.0


def test_acc_fast_lead_ignored():
    cfg = AccConfig()
    cmd = acc_plan(acc_input([vehicle_det(15.0, 0.0, vx=cfg.max_speed)],
                             speed=cfg.max_speed * 0.5), cfg, PIDState(), DT)
    assert cmd.throttle > 0.0


def test_acc_beyond_lookahead_ignored():
    cfg = AccConfig()
    cmd = acc_plan(acc_input([vehicle_det(60.0, 0.0, vx=0.0)],
                             speed=cfg.max_speed * 0.5), cfg, PIDState(), DT)
    assert cmd.throttle > 0.0 and cmd.brake == 0.0


def test_acc_brake_monotone_in_gap():
    cfg = AccConfig()
    brakes = []
    for x in np.linspace(40.0, 5.0, 36):
        cmd = acc_plan(acc_input([vehicle_det(x, 0.0, vx=0.0)]), cfg,
                       PIDState(), DT)
        brakes.append(cmd.brake)
    for earlier, closer in zip(brakes, brakes[1:]):
        assert closer >= earlier - 1e-12


def test_acc_lane_gating_lateral_translation():
    cfg = AccConfig()
    in_lane = acc_plan(acc_input([vehicle_det(12.0, 0.0, vx=0.0)]), cfg,
                       PIDState(), DT)
    shifted = acc_plan(
        acc_input([vehicle_det(12.0, cfg.lane_width + 0.5, vx=0.0)]), cfg,
        PIDState(), DT)
    assert in_lane.brake > 0.0
    assert shifted.brake == 0.0 and shifted.throttle == 0.0


def test_acc_undetected_rows_invisible():
    cfg = AccConfig()
    ghost = vehicle_det(8.0, 0.0, vx=0.0, detected=False)
    cmd = acc_plan(acc_input([ghost], speed=cfg.max_speed * 0.5), cfg,
                   PIDState(), DT)
    assert cmd.throttle > 0.0 and cmd.brake == 0.0


def test_acc_deterministic_given_input():
    cfg = AccConfig()
    dets = [vehicle_det(20.0, 0.3, vx=2.0)]
    c1 = acc_plan(acc_input(dets), cfg, PIDState(), DT)
    c2 = acc_plan(acc_input(dets), cfg, PIDState(), DT)
    assert c1 == c2


# --- basic agent ----------------------------------------------------------------

ROUTE = ((0.0, 0.0), (300.0, 0.0))


def agent_input(detections, speed=8.0, pose=Pose2D(0, 0, 0), progress=0.0):
    return PlannerInput(pose, speed, tuple(detections), ROUTE, progress)


def test_agent_corner_in_front_box_brakes():
    cfg = BasicAgentConfig()
    # box centre outside the rectangle but one corner inside
    det = vehicle_det(10.0, cfg.lane_width / 2 + 0.5)
    cmd = basic_agent_plan(agent_input([det]), cfg, PIDState(), DT)
    assert cmd.brake == 1.0


def test_agent_clear_road_tracks_cruise_speed():
    cfg = BasicAgentConfig()
    det = vehicle_det(30.0, cfg.lane_width * 2)  # outside rectangle
    ped = pedestrian_det(20.0, 0.0)              # outside semicircle
    cmd = basic_agent_plan(agent_input([det, ped], speed=4.0), cfg,
                           PIDState(), DT)
    assert cmd.throttle > 0.0 and cmd.brake == 0.0


def test_agent_pedestrian_semicircle_brakes():
    cfg = BasicAgentConfig()
    ped = pedestrian_det(cfg.pedestrian_radius - 1.0, 1.0)
    cmd = basic_agent_plan(agent_input([ped]), cfg, PIDState(), DT)
    assert cmd.brake == 1.0
    behind = pedestrian_det(-2.0, 0.0)
    cmd = basic_agent_plan(agent_input([behind], speed=4.0), cfg, PIDState(),
                           DT)
    assert cmd.brake == 0.0


def test_agent_junction_zone_slows():
    cfg = BasicAgentConfig(junctions=(50.0,))
    at_cruise = cfg.cruise_speed
    inside = basic_agent_plan(agent_input([], speed=at_cruise,
                                          pose=Pose2D(45.0, 0, 0),
                                          progress=45.0), cfg, PIDState(), DT)
    outside = basic_agent_plan(agent_input([], speed=at_cruise,
                                           pose=Pose2D(10.0, 0, 0),
                                           progress=10.0), cfg, PIDState(),
                               DT)
    assert inside.brake > 0.0         # target dropped to junction speed
    assert outside.brake == 0.0


def test_agent_route_exhausted_stops():
    cfg = BasicAgentConfig()
    cmd = basic_agent_plan(agent_input([], speed=5.0,
                                       pose=Pose2D(299.9, 0, 0),
                                       progress=299.9), cfg, PIDState(), DT)
    assert cmd.brake > 0.0 and cmd.throttle == 0.0
    with pytest.raises(ValueError):
        basic_agent_plan(PlannerInput(Pose2D(0, 0, 0), 5.0, ()), cfg,
                         PIDState(), DT)


def test_agent_pure_pursuit_steers_toward_route():
    cfg = BasicAgentConfig()
    # ego displaced above the route: steering must be negative (rightward)
    cmd = basic_agent_plan(agent_input([], pose=Pose2D(10.0, 2.0, 0.0),
                                       progress=10.0), cfg, PIDState(), DT)
    assert cmd.steer < 0.0


def test_route_length():
    assert route_length(ROUTE) == pytest.approx(300.0)
