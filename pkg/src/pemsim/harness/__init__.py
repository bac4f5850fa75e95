"""Orchestration: data collection, training, evaluation, closed-loop runs
and report emission."""

from .behaviour import (OCCLUSION_VARIANTS, VARIANTS, RunResult, TimingRecord,
                        replan_step, run_behaviour)
from .collect import collect, frame_tuples
from .compare import compare_runs, markdown_summary, write_compare_csv
from .config import (CollectConfig, HarnessConfig, LRHyperparams,
                     config_from_dict, load_config)
from .evaluate import eval_detector, eval_model, sample_rows
from .io import (read_dataset, read_jsonl, read_manifest, read_trace,
                 trace_from_rows, write_dataset, write_jsonl, write_manifest)
from .training import split_train_val, train_model

__all__ = [
    "CollectConfig", "HarnessConfig", "LRHyperparams", "OCCLUSION_VARIANTS",
    "RunResult", "TimingRecord", "VARIANTS", "collect", "compare_runs",
    "config_from_dict", "eval_detector", "eval_model", "frame_tuples",
    "load_config", "markdown_summary", "read_dataset", "read_jsonl",
    "read_manifest", "read_trace", "replan_step", "run_behaviour",
    "sample_rows", "split_train_val", "trace_from_rows", "train_model",
    "write_compare_csv", "write_dataset", "write_jsonl", "write_manifest",
]
