"""File I/O for datasets, traces and manifests.

Datasets and traces are JSON-lines; each artifact directory carries a
manifest listing every file with the config hash and seeds it came from.
Floats round-trip exactly through `repr`, so a written-then-read dataset
is bitwise identical.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ..metrics import TrajectoryTrace
from ..surrogates import TupleDataset

DATASET_VERSION = 1
TRACE_VERSION = 1


def write_jsonl(path, rows: list[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for row in rows:
            fh.write(json.dumps(row))
            fh.write("\n")


def read_jsonl(path) -> list[dict]:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_dataset(path, dataset: TupleDataset) -> None:
    write_jsonl(path, dataset.to_rows())


def read_dataset(path) -> TupleDataset:
    return TupleDataset.from_rows(read_jsonl(path))


def trace_from_rows(rows: list[dict], truncated: bool = False) -> TrajectoryTrace:
    """Build the in-memory trace from per-step records
    {t, ego_pose, ego_speed, brake, collisions}."""
    t = np.array([r["t"] for r in rows])
    pos = np.array([r["ego_pose"][:2] for r in rows])
    vel = np.array([[r["ego_speed"] * math.cos(r["ego_pose"][2]),
                     r["ego_speed"] * math.sin(r["ego_pose"][2])]
                    for r in rows])
    brake = np.array([r["brake"] for r in rows])
    collision_times = tuple(r["t"] for r in rows if r["collisions"])
    return TrajectoryTrace(t, pos, vel, brake, collision_times, truncated)


def read_trace(path) -> TrajectoryTrace:
    return trace_from_rows(read_jsonl(path))


def write_manifest(path, entries: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(entries, sort_keys=True, indent=1))


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())
