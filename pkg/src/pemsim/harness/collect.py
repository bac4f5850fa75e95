"""Training-tuple collection.

Scenarios are run closed-loop with the synthetic detector driving the
planner. Every frame, ground-truth boxes are matched to the detected
boxes per class (Hungarian on 1 - IoU); matched actors yield detected
tuples carrying the detector's position/velocity error, unmatched
ground-truth actors yield missed tuples.
"""

from __future__ import annotations

from dataclasses import replace

from ..association import associate_frame
from ..geometry import OrientedBox
from ..scene import CLASSES, salient_box
from ..surrogates import TupleDataset
from .behaviour import run_behaviour
from .config import HarnessConfig

IOU_GATE = 0.1


def frame_tuples(salients, detections, scenario_index: int,
                 frame_index: int, iou_gate: float = IOU_GATE) -> list[dict]:
    """Tuple rows for one frame, matched within each actor class."""
    sv_by_id = {sv.actor_id: sv for sv in salients}
    rows = []
    for ci, cls in enumerate(CLASSES):
        svs = [sv for sv in salients if sv.class_onehot[ci] == 1.0]
        if not svs:
            continue
        dets = [d for d in detections
                if d.detected and sv_by_id[d.actor_id].class_onehot[ci] == 1.0]
        gt_boxes = [salient_box(sv) for sv in svs]
        det_boxes = [OrientedBox(d.position[0], d.position[1], d.extent[0],
                                 d.extent[1], sv_by_id[d.actor_id].rel_yaw)
                     for d in dets]
        assign = associate_frame(gt_boxes, det_boxes, iou_gate)
        matched = dict(assign.pairs)
        for gi, sv in enumerate(svs):
            row = {
                "scenario": scenario_index,
                "frame": frame_index,
                "actor_id": sv.actor_id,
                "salient": {
                    "rel_x": sv.rel_position[0], "rel_y": sv.rel_position[1],
                    "rel_yaw": sv.rel_yaw, "speed": sv.speed,
                    "angular_velocity": sv.angular_velocity,
                    "length": sv.extent[0], "width": sv.extent[1],
                    "occlusion": sv.occlusion, "distance": sv.distance,
                    "class_vehicle": sv.class_onehot[0],
                    "class_pedestrian": sv.class_onehot[1],
                },
            }
            if gi in matched:
                d = dets[matched[gi]]
                tvx, tvy = sv.velocity_ego_frame()
                row["target"] = {
                    "detected": True,
                    "dx": d.position[0] - sv.rel_position[0],
                    "dy": d.position[1] - sv.rel_position[1],
                    "dvx": d.velocity[0] - tvx,
                    "dvy": d.velocity[1] - tvy,
                }
            else:
                row["target"] = {"detected": False}
            rows.append(row)
    return rows


def collect(cfg: HarnessConfig) -> TupleDataset:
    """Run cfg.collect.runs scenario instances and gather tuples.

    Scenario index i uses scenario seed (spec.seed + i) and detector seed
    (detector.seed + i) so instances are independent but reproducible.
    """
    all_rows: list[dict] = []
    for index in range(cfg.collect.runs):
        scenario = replace(cfg.scenario, seed=cfg.scenario.seed + index)
        run_cfg = replace_config_scenario(cfg, scenario)
        frame_counter = {"k": 0}

        def hook(world, salients, detections, _index=index,
                 _counter=frame_counter):
            all_rows.extend(frame_tuples(salients, detections, _index,
                                         _counter["k"]))
            _counter["k"] += 1

        run_behaviour(run_cfg, "detector", cfg.detector.seed + index,
                      frame_hook=hook)
    return TupleDataset.from_rows(all_rows)


def replace_config_scenario(cfg: HarnessConfig, scenario) -> HarnessConfig:
    return HarnessConfig(scenario, cfg.detector, cfg.rayfan, cfg.planner_kind,
                         cfg.acc, cfg.basic_agent, cfg.ns, cfg.lr,
                         cfg.collect, cfg.raw)
