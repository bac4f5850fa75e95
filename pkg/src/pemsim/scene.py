"""World state, scenario construction and kinematic stepping.

The world is a flat 2D scene: one ego vehicle driven by external control
commands plus scripted background actors whose poses are closed-form
functions of time (no integration drift, bitwise reproducible). Collision
events are onsets of oriented-box overlap between a pair of actors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import OrientedBox, Pose2D, boxes_overlap, normalize_angle

VEHICLE = "vehicle"
PEDESTRIAN = "pedestrian"
CLASSES = (VEHICLE, PEDESTRIAN)

# ego dynamics limits (kinematic bicycle)
ACCEL_MAX = 3.0       # m/s^2, full throttle
BRAKE_MAX = 8.0       # m/s^2, full brake
STEER_ANGLE_MAX = 0.5  # rad, front wheel angle at steer = +-1
STEER_RATE_MAX = 1.2   # rad/s slew of the front wheel angle
WHEELBASE = 2.8        # m
SPEED_MAX = 30.0       # hard cap, scenario planners stay well below

DEFAULT_VEHICLE_EXTENT = (4.5, 2.0)
DEFAULT_PEDESTRIAN_EXTENT = (0.6, 0.6)


@dataclass(frozen=True)
class ActorState:
    """One actor: pose, scalar speed along heading, extent and class."""

    actor_id: int
    actor_class: str
    pose: Pose2D
    speed: float
    angular_velocity: float
    extent: tuple[float, float]
    is_ego: bool = False

    def __post_init__(self):
        if self.actor_class not in CLASSES:
            raise ValueError(f"unknown actor class {self.actor_class!r}")
        if self.extent[0] <= 0.0 or self.extent[1] <= 0.0:
            raise ValueError("actor extent must be positive")

    def box(self) -> OrientedBox:
        return OrientedBox(self.pose.x, self.pose.y, self.extent[0],
                           self.extent[1], self.pose.yaw)

    def velocity(self) -> tuple[float, float]:
        """World-frame velocity vector."""
        fx, fy = self.pose.forward()
        return self.speed * fx, self.speed * fy


@dataclass(frozen=True)
class LaneSegment:
    """Straight lane centreline with a width."""

    start: tuple[float, float]
    end: tuple[float, float]
    width: float


@dataclass(frozen=True)
class ActorScript:
    """Closed-form motion script for a background actor.

    The actor travels along `heading` from `origin` at piecewise-constant
    speed given by `speed_profile` ([(t, speed), ...], step interpolation,
    first entry at t=0). An optional lateral shift (lane change) ramps the
    cross-track offset from 0 to `shift_offset` linearly over
    `shift_duration` seconds starting at `shift_time`.
    """

    origin: tuple[float, float]
    heading: float
    speed_profile: tuple[tuple[float, float], ...] = ((0.0, 0.0),)
    shift_time: float | None = None
    shift_offset: float = 0.0
    shift_duration: float = 1.0

    def longitudinal(self, t: float) -> tuple[float, float]:
        """Distance travelled and current speed at time t.

        Times before the first profile entry extrapolate backwards at the
        initial speed (used to rewind the world for tracker warm-up).
        """
        profile = self.speed_profile
        t0, v0 = profile[0]
        if t <= t0:
            return v0 * (t - t0), v0
        s = 0.0
        speed = v0
        for i, (tk, vk) in enumerate(profile):
            if t <= tk:
                break
            t_next = profile[i + 1][0] if i + 1 < len(profile) else math.inf
            s += vk * (min(t, t_next) - tk)
            speed = vk
        return s, speed

    def lateral(self, t: float) -> float:
        if self.shift_time is None or t <= self.shift_time:
            return 0.0
        frac = min(1.0, (t - self.shift_time) / max(self.shift_duration, 1e-9))
        return frac * self.shift_offset

    def state_at(self, t: float) -> tuple[Pose2D, float]:
        s, speed = self.longitudinal(t)
        lat = self.lateral(t)
        c, m = math.cos(self.heading), math.sin(self.heading)
        x = self.origin[0] + c * s - m * lat
        y = self.origin[1] + m * s + c * lat
        return Pose2D(x, y, self.heading), speed


@dataclass(frozen=True)
class WorldState:
    """Full simulator state: time, actors, lanes and per-step bookkeeping.

    `collisions` holds the actor-id pairs whose boxes started overlapping
    during the last step. `ego_steer` is the current front wheel angle,
    carried so that steering-rate limits apply across steps.
    """

    time: float
    actors: tuple[ActorState, ...]
    lanes: tuple[LaneSegment, ...] = ()
    scripts: dict[int, ActorScript] = field(default_factory=dict)
    ego_steer: float = 0.0
    collisions: tuple[tuple[int, int], ...] = ()
    overlapping: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        ids = [a.actor_id for a in self.actors]
        if len(set(ids)) != len(ids):
            raise ValueError("actor ids must be unique")
        egos = [a for a in self.actors if a.is_ego]
        if len(egos) != 1:
            raise ValueError("world must contain exactly one ego actor")

    @property
    def ego(self) -> ActorState:
        for a in self.actors:
            if a.is_ego:
                return a
        raise RuntimeError("no ego actor")  # unreachable, checked at init

    def non_ego(self) -> tuple[ActorState, ...]:
        return tuple(a for a in self.actors if not a.is_ego)

    def actor_by_id(self, actor_id: int) -> ActorState:
        for a in self.actors:
            if a.actor_id == actor_id:
                return a
        raise KeyError(actor_id)


@dataclass(frozen=True)
class SalientVector:
    """Per-actor low-dimensional description in the ego frame."""

    actor_id: int
    rel_position: tuple[float, float]
    rel_yaw: float
    speed: float
    angular_velocity: float
    extent: tuple[float, float]
    occlusion: float
    distance: float
    class_onehot: tuple[float, ...]

    def velocity_ego_frame(self) -> tuple[float, float]:
        """Actor's absolute velocity expressed along the ego frame axes."""
        return (self.speed * math.cos(self.rel_yaw),
                self.speed * math.sin(self.rel_yaw))


@dataclass(frozen=True)
class ScenarioSpec:
    """Scenario recipe: kind, duration, timestep, seed and kind parameters.

    `params` carries the kind-specific keys documented in the README
    (initial gaps and speeds for `acc`, actor counts for `urban_routes`).
    """

    kind: str
    duration: float = 30.0
    timestep: float = 0.05
    seed: int = 0
    lane_width: float = 3.5
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("acc", "urban_routes"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.timestep <= 0.0:
            raise ValueError("timestep must be positive")
        if self.duration < self.timestep:
            raise ValueError("duration must cover at least one step")


ACC_DEFAULTS = {
    "ego_speed": 10.0,
    "lead_gap": 25.0,
    "lead_speed": 10.0,
    "parked_gap": 120.0,
    "cutout_time": 7.0,
    "cutout_duration": 1.5,
}


def _check_no_overlap(actors: list[ActorState]) -> None:
    for i in range(len(actors)):
        for j in range(i + 1, len(actors)):
            if boxes_overlap(actors[i].box(), actors[j].box()):
                raise ValueError(
                    f"actors {actors[i].actor_id} and {actors[j].actor_id} "
                    "overlap at scenario start")


def build_acc_scenario(spec: ScenarioSpec) -> WorldState:
    """Cut-out scenario: ego follows a lead vehicle which changes lane at a
    trigger time, revealing a parked vehicle further down the ego lane.
    """
    if spec.kind != "acc":
        raise ValueError("spec.kind must be 'acc'")
    p = {**ACC_DEFAULTS, **spec.params}
    for key in ("lead_gap", "parked_gap"):
        if p[key] <= 0.0:
            raise ValueError(f"{key} must be positive")
    if p["parked_gap"] <= p["lead_gap"]:
        raise ValueError("parked vehicle must start beyond the lead")

    lane_w = spec.lane_width
    ego = ActorState(0, VEHICLE, Pose2D(0.0, 0.0, 0.0), p["ego_speed"], 0.0,
                     DEFAULT_VEHICLE_EXTENT, is_ego=True)
    lead = ActorState(1, VEHICLE, Pose2D(p["lead_gap"], 0.0, 0.0),
                      p["lead_speed"], 0.0, DEFAULT_VEHICLE_EXTENT)
    parked = ActorState(2, VEHICLE, Pose2D(p["parked_gap"], 0.0, 0.0), 0.0,
                        0.0, DEFAULT_VEHICLE_EXTENT)
    actors = [ego, lead, parked]
    _check_no_overlap(actors)

    scripts = {
        1: ActorScript(origin=(p["lead_gap"], 0.0), heading=0.0,
                       speed_profile=((0.0, p["lead_speed"]),),
                       shift_time=p["cutout_time"], shift_offset=lane_w,
                       shift_duration=p["cutout_duration"]),
        2: ActorScript(origin=(p["parked_gap"], 0.0), heading=0.0),
    }
    length = p["parked_gap"] + 60.0
    lanes = (LaneSegment((-20.0, 0.0), (length, 0.0), lane_w),
             LaneSegment((-20.0, lane_w), (length, lane_w), lane_w))
    return WorldState(0.0, tuple(actors), lanes, scripts)


URBAN_DEFAULTS = {
    "n_vehicles": 12,
    "n_pedestrians": 6,
    "road_length": 300.0,
    "ego_speed": 10.0,
    "parked_fraction": 0.4,
    "junction_spacing": 80.0,
}


def build_urban_scenario(spec: ScenarioSpec, rng: np.random.Generator) -> WorldState:
    """Two-lane straight road with scripted traffic, roadside parked cars
    and crossing pedestrians. Ego follows the right-lane centreline.
    """
    if spec.kind != "urban_routes":
        raise ValueError("spec.kind must be 'urban_routes'")
    p = {**URBAN_DEFAULTS, **spec.params}
    lane_w = spec.lane_width
    road_len = p["road_length"]

    ego = ActorState(0, VEHICLE, Pose2D(0.0, 0.0, 0.0), p["ego_speed"], 0.0,
                     DEFAULT_VEHICLE_EXTENT, is_ego=True)
    actors = [ego]
    scripts: dict[int, ActorScript] = {}
    next_id = 1

    n_parked = int(round(p["n_vehicles"] * p["parked_fraction"]))
    n_moving = p["n_vehicles"] - n_parked
    for _ in range(n_parked):
        x = float(rng.uniform(15.0, road_len))
        side = float(rng.choice([-1.0, 1.0]))
        y = side * (lane_w * 0.5 + 1.4)
        actors.append(ActorState(next_id, VEHICLE, Pose2D(x, y, 0.0), 0.0,
                                 0.0, DEFAULT_VEHICLE_EXTENT))
        scripts[next_id] = ActorScript(origin=(x, y), heading=0.0)
        next_id += 1
    for _ in range(n_moving):
        same_dir = bool(rng.random() < 0.5)
        speed = float(rng.uniform(5.0, 13.0))
        if same_dir:
            x = float(rng.uniform(20.0, road_len))
            y, heading = 0.0, 0.0
        else:
            x = float(rng.uniform(20.0, road_len))
            y, heading = lane_w, math.pi
        actors.append(ActorState(next_id, VEHICLE, Pose2D(x, y, heading),
                                 speed, 0.0, DEFAULT_VEHICLE_EXTENT))
        scripts[next_id] = ActorScript(origin=(x, y), heading=heading,
                                       speed_profile=((0.0, speed),))
        next_id += 1
    for _ in range(p["n_pedestrians"]):
        x = float(rng.uniform(10.0, road_len))
        start_y = float(rng.choice([-1.0, 1.0])) * (lane_w * 0.5 + 2.5)
        walk_delay = float(rng.uniform(0.0, spec.duration * 0.5))
        heading = math.pi / 2.0 if start_y < 0 else -math.pi / 2.0
        actors.append(ActorState(next_id, PEDESTRIAN,
                                 Pose2D(x, start_y, heading), 0.0, 0.0,
                                 DEFAULT_PEDESTRIAN_EXTENT))
        scripts[next_id] = ActorScript(
            origin=(x, start_y), heading=heading,
            speed_profile=((0.0, 0.0), (walk_delay, 1.4)))
        next_id += 1

    # nudge apart any overlapping initial placements instead of rejecting
    placed: list[ActorState] = [ego]
    for a in actors[1:]:
        shifted = a
        tries = 0
        while any(boxes_overlap(shifted.box(), b.box()) for b in placed) and tries < 50:
            new_x = shifted.pose.x + 6.0
            shifted = replace(shifted, pose=Pose2D(new_x, shifted.pose.y,
                                                   shifted.pose.yaw))
            tries += 1
        if shifted is not a:
            scr = scripts[a.actor_id]
            scripts[a.actor_id] = replace(
                scr, origin=(shifted.pose.x, shifted.pose.y))
        placed.append(shifted)

    lanes = (LaneSegment((-20.0, 0.0), (road_len + 60.0, 0.0), lane_w),
             LaneSegment((-20.0, lane_w), (road_len + 60.0, lane_w), lane_w))
    return WorldState(0.0, tuple(placed), lanes, scripts)


def build_scenario(spec: ScenarioSpec,
                   rng: np.random.Generator | None = None) -> WorldState:
    if spec.kind == "acc":
        return build_acc_scenario(spec)
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    return build_urban_scenario(spec, rng)


def _step_ego(ego: ActorState, steer_state: float,
              control: tuple[float, float, float],
              dt: float) -> tuple[ActorState, float]:
    throttle, brake, steer = control
    throttle = min(max(throttle, 0.0), 1.0)
    brake = min(max(brake, 0.0), 1.0)
    steer = min(max(steer, -1.0), 1.0)

    accel = throttle * ACCEL_MAX - brake * BRAKE_MAX
    speed = min(max(ego.speed + accel * dt, 0.0), SPEED_MAX)

    target_angle = steer * STEER_ANGLE_MAX
    max_slew = STEER_RATE_MAX * dt
    angle = steer_state + min(max(target_angle - steer_state, -max_slew), max_slew)

    yaw_rate = speed * math.tan(angle) / WHEELBASE
    yaw = normalize_angle(ego.pose.yaw + yaw_rate * dt)
    # semi-implicit: displacement uses the updated speed and prior heading,
    # so per-step displacement is exactly speed*dt
    x = ego.pose.x + speed * math.cos(ego.pose.yaw) * dt
    y = ego.pose.y + speed * math.sin(ego.pose.yaw) * dt
    new_ego = replace(ego, pose=Pose2D(x, y, yaw), speed=speed,
                      angular_velocity=yaw_rate)
    return new_ego, angle


def step_world(state: WorldState, ego_control: tuple[float, float, float],
               dt: float) -> WorldState:
    """Advance the world by dt.

    Ego follows a kinematic bicycle model under (throttle, brake, steer);
    scripted actors are placed from their closed-form scripts at the new
    time. Collision events are onsets of box overlap involving any pair.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    t_new = state.time + dt

    new_actors = []
    steer_state = state.ego_steer
    for a in state.actors:
        if a.is_ego:
            stepped, steer_state = _step_ego(a, state.ego_steer, ego_control, dt)
            new_actors.append(stepped)
        elif a.actor_id in state.scripts:
            pose, speed = state.scripts[a.actor_id].state_at(t_new)
            new_actors.append(replace(a, pose=pose, speed=speed))
        else:
            new_actors.append(a)

    overlapping = set()
    for i in range(len(new_actors)):
        for j in range(i + 1, len(new_actors)):
            if boxes_overlap(new_actors[i].box(), new_actors[j].box()):
                pair = (new_actors[i].actor_id, new_actors[j].actor_id)
                overlapping.add((min(pair), max(pair)))
    onsets = tuple(sorted(p for p in overlapping if p not in state.overlapping))

    return WorldState(t_new, tuple(new_actors), state.lanes, state.scripts,
                      steer_state, onsets, frozenset(overlapping))


def world_at_negative_time(world: WorldState, t: float) -> WorldState:
    """Scenario state extrapolated to a time before start (t <= 0).

    Scripted actors follow their scripts backwards; the ego rewinds in a
    straight line at its initial speed. Used to warm up trackers so that
    velocity estimates are settled when the scenario begins.
    """
    actors = []
    for a in world.actors:
        if a.is_ego:
            fx, fy = a.pose.forward()
            pose = Pose2D(a.pose.x + fx * a.speed * t,
                          a.pose.y + fy * a.speed * t, a.pose.yaw)
            actors.append(replace(a, pose=pose))
        elif a.actor_id in world.scripts:
            pose, speed = world.scripts[a.actor_id].state_at(t)
            actors.append(replace(a, pose=pose, speed=speed))
        else:
            actors.append(a)
    return WorldState(t, tuple(actors), world.lanes, world.scripts)


def extract_salient(state: WorldState,
                    occlusions: dict[int, float]) -> list[SalientVector]:
    """Map the world into per-actor salient vectors in the ego frame."""
    ego = state.ego
    out = []
    for a in state.non_ego():
        if a.actor_id not in occlusions:
            raise KeyError(f"missing occlusion entry for actor {a.actor_id}")
        rel = ego.pose.transform_to_frame(a.pose.x, a.pose.y)
        onehot = tuple(1.0 if a.actor_class == c else 0.0 for c in CLASSES)
        out.append(SalientVector(
            actor_id=a.actor_id,
            rel_position=rel,
            rel_yaw=normalize_angle(a.pose.yaw - ego.pose.yaw),
            speed=a.speed,
            angular_velocity=a.angular_velocity,
            extent=a.extent,
            occlusion=float(occlusions[a.actor_id]),
            distance=math.hypot(rel[0], rel[1]),
            class_onehot=onehot,
        ))
    return out


def salient_box(sv: SalientVector) -> OrientedBox:
    """Ground-truth box of an actor in the ego frame."""
    return OrientedBox(sv.rel_position[0], sv.rel_position[1],
                       sv.extent[0], sv.extent[1], sv.rel_yaw)
