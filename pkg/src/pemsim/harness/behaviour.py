"""Closed-loop simulation runs for every perception variant.

One run steps the scenario at its timestep, feeding the chosen perception
(real detector or a surrogate) into the scenario's planner and recording
the ego trace plus per-frame stage timings. The occlusion stage only runs
for variants that consume occlusion (detector, ns, lr); ground truth and
the fuzzer skip it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..detector import VelocityTracker, detect
from ..metrics import TrajectoryTrace
from ..planners import (PIDState, PlannerInput, acc_plan, basic_agent_plan,
                        route_length)
from ..raycast import occlusion_fractions
from ..scene import (ACCEL_MAX, BRAKE_MAX, WorldState, build_scenario,
                     extract_salient, step_world, world_at_negative_time)
from ..surrogates import gf_sample, gt_passthrough, lr_apply
from .config import HarnessConfig
from .io import trace_from_rows

VARIANTS = ("detector", "ns", "lr", "gf", "gt")
OCCLUSION_VARIANTS = ("detector", "ns", "lr")
WARMUP_FRAMES = 20  # pre-roll so Kalman velocities are settled at t=0


@dataclass
class TimingRecord:
    """Per-frame wall times (seconds) for each pipeline stage."""
    sim: list[float] = field(default_factory=list)         # occlusion+salient
    perception: list[float] = field(default_factory=list)  # detector/surrogate
    plan: list[float] = field(default_factory=list)
    loop: list[float] = field(default_factory=list)

    def medians(self) -> dict[str, float]:
        med = lambda xs: float(np.median(xs)) if xs else 0.0
        return {"sim": med(self.sim), "perception": med(self.perception),
                "plan": med(self.plan), "loop": med(self.loop),
                "dtpf": med(self.perception), "ttpf": med(self.loop)}


@dataclass
class RunResult:
    variant: str
    seed: int
    trace_rows: list[dict]
    trace: TrajectoryTrace
    timing: TimingRecord
    truncated: bool
    frames: list | None = None   # (ego_pose, ego_speed, salients) if kept


def _make_perceiver(variant: str, cfg: HarnessConfig, model,
                    rng: np.random.Generator):
    """Returns (perceive, warmup) for the chosen variant.

    The detector variant pre-rolls its tracker over rewound frames so the
    scenario starts with established velocity estimates, like a detection
    stack that has been running before the scenario window.
    """
    if variant == "detector":
        tracker = VelocityTracker(cfg.detector.kalman_meas_noise)

        def perceive(salients, ego_pose, t, dt):
            dets = detect(salients, cfg.detector, rng)
            return tracker.step(dets, ego_pose, t, dt)

        def warmup(world: WorldState, dt: float):
            for k in range(WARMUP_FRAMES, 0, -1):
                past = world_at_negative_time(world, -k * dt)
                if not past.non_ego():
                    return
                occ = occlusion_fractions(past, cfg.rayfan)
                sal = extract_salient(past, occ)
                perceive(sal, past.ego.pose, past.time, dt)
        return perceive, warmup

    no_warmup = lambda world, dt: None
    if variant == "ns":
        if model is None:
            raise ValueError("ns variant needs a trained model")
        return (lambda sal, pose, t, dt: model.sample(sal, rng)), no_warmup
    if variant == "lr":
        if model is None:
            raise ValueError("lr variant needs a trained model")
        params, std = model
        return (lambda sal, pose, t, dt: lr_apply(sal, params, std, rng)), \
            no_warmup
    if variant == "gf":
        if model is None:
            raise ValueError("gf variant needs fitted noise parameters")
        return (lambda sal, pose, t, dt: gf_sample(sal, model, rng)), no_warmup
    if variant == "gt":
        return (lambda sal, pose, t, dt: gt_passthrough(sal)), no_warmup
    raise ValueError(f"unknown variant {variant!r}")


def _world_bounds(world: WorldState) -> tuple[float, float, float]:
    xs = [p for lane in world.lanes for p in (lane.start[0], lane.end[0])]
    if not xs:
        xs = [0.0]
    return min(xs) - 60.0, max(xs) + 60.0, 50.0


def _ego_route(world: WorldState) -> tuple[tuple[float, float], ...]:
    if not world.lanes:
        return ()
    lane = world.lanes[0]
    return (lane.start, lane.end)


def run_behaviour(cfg: HarnessConfig, variant: str, seed: int, model=None,
                  keep_frames: bool = False,
                  frame_hook=None) -> RunResult:
    """Run one closed-loop simulation.

    `frame_hook(world, salients, detections)` is called once per frame
    (used by data collection). The run is truncated and flagged if the
    ego leaves the scenario bounds.
    """
    spec = cfg.scenario
    world = build_scenario(spec)
    dt = spec.timestep
    n_steps = int(round(spec.duration / dt))
    rng = np.random.default_rng(seed)
    perceive, warmup = _make_perceiver(variant, cfg, model, rng)
    warmup(world, dt)
    pid = PIDState()
    route = _ego_route(world)
    route_len = route_length(route) if route else 0.0
    x_lo, x_hi, y_abs = _world_bounds(world)

    rows: list[dict] = []
    timing = TimingRecord()
    frames = [] if keep_frames else None
    truncated = False

    for _ in range(n_steps):
        t0 = time.perf_counter()
        ego = world.ego
        if variant in OCCLUSION_VARIANTS and world.non_ego():
            occ = occlusion_fractions(world, cfg.rayfan)
        else:
            occ = {a.actor_id: 0.0 for a in world.non_ego()}
        salients = extract_salient(world, occ)
        t1 = time.perf_counter()
        detections = perceive(salients, ego.pose, world.time, dt)
        t2 = time.perf_counter()
        inp = PlannerInput(ego.pose, ego.speed, tuple(detections), route,
                           _progress_along(route, ego.pose.x, ego.pose.y))
        if cfg.planner_kind == "acc":
            command = acc_plan(inp, cfg.acc, pid, dt)
        else:
            command = basic_agent_plan(inp, cfg.basic_agent, pid, dt)
        t3 = time.perf_counter()
        if frame_hook is not None:
            frame_hook(world, salients, detections)
        if frames is not None:
            frames.append((ego.pose, ego.speed, salients))
        t_now = world.time
        world = step_world(world, command.as_tuple(), dt)
        t4 = time.perf_counter()

        ego_hits = sorted(other for pair in world.collisions
                          for other in pair if ego.actor_id in pair
                          and other != ego.actor_id)
        rows.append({
            "t": t_now,
            "ego_pose": [ego.pose.x, ego.pose.y, ego.pose.yaw],
            "ego_speed": ego.speed,
            "brake": command.brake,
            "collisions": ego_hits,
        })
        timing.sim.append(t1 - t0)
        timing.perception.append(t2 - t1)
        timing.plan.append(t3 - t2)
        timing.loop.append(t4 - t0)

        new_ego = world.ego
        if not (x_lo <= new_ego.pose.x <= x_hi and abs(new_ego.pose.y) <= y_abs):
            truncated = True
            break
        if route and cfg.planner_kind == "basic_agent" \
                and _progress_along(route, new_ego.pose.x, new_ego.pose.y) \
                >= route_len - 1.0 and new_ego.speed < 0.05:
            break  # route finished and stopped

    trace = trace_from_rows(rows, truncated)
    return RunResult(variant, seed, rows, trace, timing, truncated, frames)


def _progress_along(route, x: float, y: float) -> float:
    """Arc length of the closest point on the route polyline."""
    if not route or len(route) < 2:
        return 0.0
    best_s, best_d = 0.0, math.inf
    acc = 0.0
    for i in range(len(route) - 1):
        ax, ay = route[i]
        bx, by = route[i + 1]
        ex, ey = bx - ax, by - ay
        seg = math.hypot(ex, ey)
        if seg < 1e-12:
            continue
        f = ((x - ax) * ex + (y - ay) * ey) / (seg * seg)
        f = min(max(f, 0.0), 1.0)
        px, py = ax + f * ex, ay + f * ey
        d = math.hypot(x - px, y - py)
        if d < best_d:
            best_d = d
            best_s = acc + f * seg
        acc += seg
    return best_s


def replan_step(cfg: HarnessConfig, ego_pose, ego_speed, salients,
                sampler, rng: np.random.Generator,
                route=()) -> np.ndarray:
    """One open-loop replan from a reference state under a fresh surrogate
    sample: perceive, plan with a fresh controller, integrate one step.
    Returns the resulting ego position."""
    detections = sampler(salients, rng)
    pid = PIDState()
    progress = _progress_along(route, ego_pose.x, ego_pose.y) if route else 0.0
    inp = PlannerInput(ego_pose, ego_speed, tuple(detections), route, progress)
    dt = cfg.scenario.timestep
    if cfg.planner_kind == "acc":
        command = acc_plan(inp, cfg.acc, pid, dt)
    else:
        command = basic_agent_plan(inp, cfg.basic_agent, pid, dt)
    # kinematic step of the ego alone
    accel = command.throttle * ACCEL_MAX - command.brake * BRAKE_MAX
    speed = max(ego_speed + accel * dt, 0.0)
    x = ego_pose.x + speed * math.cos(ego_pose.yaw) * dt
    y = ego_pose.y + speed * math.sin(ego_pose.yaw) * dt
    return np.array([x, y])
