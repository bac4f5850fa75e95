"""YAML run configuration.

One file configures everything: scenario, detector profile, ray fan,
planner, training hyperparameters and data collection. Every key has a
default; see the README for the documented key set.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..detector import DetectorProfile
from ..geometry import Pose2D
from ..planners import AccConfig, BasicAgentConfig, PIDGains
from ..raycast import RayFanConfig
from ..scene import ScenarioSpec
from ..surrogates import NSHyperparams


@dataclass
class LRHyperparams:
    alpha: float = 0.6
    gamma: float = 2.0
    learning_rate: float = 1e-2
    iterations: int = 3000
    batch_size: int = 2048


@dataclass
class CollectConfig:
    runs: int = 11
    train_scenarios: tuple[int, ...] = tuple(range(10))
    test_scenarios: tuple[int, ...] = (10,)
    val_fraction: float = 0.1


@dataclass
class HarnessConfig:
    scenario: ScenarioSpec
    detector: DetectorProfile
    rayfan: RayFanConfig
    planner_kind: str
    acc: AccConfig
    basic_agent: BasicAgentConfig
    ns: NSHyperparams
    lr: LRHyperparams
    collect: CollectConfig
    raw: dict = field(default_factory=dict, repr=False)

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True).encode()).hexdigest()[:16]


def _gains(d: dict) -> PIDGains:
    return PIDGains(kp=d.get("kp", 0.8), ki=d.get("ki", 0.05),
                    kd=d.get("kd", 0.1),
                    integral_limit=d.get("integral_limit", 2.0))


def config_from_dict(doc: dict) -> HarnessConfig:
    doc = doc or {}
    s = doc.get("scenario", {})
    spec = ScenarioSpec(
        kind=s.get("kind", "acc"),
        duration=float(s.get("duration", 30.0)),
        timestep=float(s.get("timestep", 0.05)),
        seed=int(s.get("seed", 0)),
        lane_width=float(s.get("lane_width", 3.5)),
        params=dict(s.get("params", {})),
    )
    d = doc.get("detector", {})
    profile = DetectorProfile(
        intercept=float(d.get("intercept", 4.0)),
        distance_coeff=float(d.get("distance_coeff", -0.08)),
        occlusion_coeff=float(d.get("occlusion_coeff", -6.0)),
        distance_occlusion_coeff=float(d.get("distance_occlusion_coeff", 0.0)),
        sigma0=float(d.get("sigma0", 0.2)),
        sigma1=float(d.get("sigma1", 0.005)),
        kalman_meas_noise=float(d.get("kalman_meas_noise", 0.3)),
        seed=int(d.get("seed", 0)),
        frame_sleep=float(d.get("frame_sleep", 0.0)),
    )
    r = doc.get("rayfan", {})
    offset = r.get("sensor_offset", [0.0, 0.0, 0.0])
    rayfan = RayFanConfig(
        ray_count=int(r.get("ray_count", 360)),
        fov=float(r.get("fov", 6.283185307179586)),
        max_range=float(r.get("max_range", 100.0)),
        sensor_offset=Pose2D(*offset),
    )
    p = doc.get("planner", {})
    planner_kind = p.get("kind", "acc" if spec.kind == "acc" else "basic_agent")
    acc = AccConfig(
        max_speed=float(p.get("max_speed", 10.0)),
        headway=float(p.get("headway", 5.0)),
        gap_gain=float(p.get("gap_gain", 0.35)),
        emergency_gap=float(p.get("emergency_gap", 0.1)),
        lane_width=spec.lane_width,
        gains=_gains(p.get("gains", {})),
    )
    agent = BasicAgentConfig(
        cruise_speed=float(p.get("cruise_speed", 10.0)),
        junction_speed=float(p.get("junction_speed", 4.0)),
        junction_zone=float(p.get("junction_zone", 12.0)),
        brake_box_length=float(p.get("brake_box_length", 14.0)),
        pedestrian_radius=float(p.get("pedestrian_radius", 9.0)),
        lane_width=spec.lane_width,
        junctions=tuple(p.get("junctions", (80.0, 160.0, 240.0))),
        gains=_gains(p.get("gains", {})),
    )
    t = doc.get("train", {})
    ns = NSHyperparams(
        width=int(t.get("width", 64)),
        n_blocks=int(t.get("n_blocks", 3)),
        dropout=float(t.get("dropout", 0.3)),
        learning_rate=float(t.get("learning_rate", 1e-3)),
        iterations=int(t.get("iterations", 20000)),
        batch_size=int(t.get("batch_size", 1024)),
        velocity_head=bool(t.get("velocity_head", True)),
        stratify_bins=int(t.get("stratify_bins", 10)),
        val_every=int(t.get("val_every", 500)),
    )
    lr_hp = LRHyperparams(
        alpha=float(t.get("focal_alpha", 0.6)),
        gamma=float(t.get("focal_gamma", 2.0)),
        learning_rate=float(t.get("lr_learning_rate", 1e-2)),
        iterations=int(t.get("lr_iterations", 3000)),
        batch_size=int(t.get("lr_batch_size", 2048)),
    )
    c = doc.get("collect", {})
    runs = int(c.get("runs", 11))
    collect = CollectConfig(
        runs=runs,
        train_scenarios=tuple(c.get("train_scenarios", range(runs - 1))),
        test_scenarios=tuple(c.get("test_scenarios", (runs - 1,))),
        val_fraction=float(c.get("val_fraction", 0.1)),
    )
    return HarnessConfig(spec, profile, rayfan, planner_kind, acc, agent,
                         ns, lr_hp, collect, raw=doc)


def load_config(path) -> HarnessConfig:
    doc = yaml.safe_load(Path(path).read_text())
    return config_from_dict(doc)
