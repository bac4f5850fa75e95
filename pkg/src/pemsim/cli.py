"""Command-line entry points.

Subcommands:
  collect     run scenarios with the detector and write training tuples
  train       fit a surrogate (ns | lr | gf) on a dataset
  eval-model  score a model on the held-out scenarios of a dataset
  run         closed-loop behaviour runs for one perception variant
  compare     pairwise behaviour tables, braking and collision CDFs
  report      assemble a markdown summary from a results directory

Every command takes --config (YAML) and is deterministic given --seed.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from .harness import (collect, compare_runs, eval_detector, eval_model,
                      load_config, markdown_summary, read_dataset,
                      read_manifest, read_trace, run_behaviour, train_model,
                      write_compare_csv, write_dataset, write_jsonl,
                      write_manifest)
from .surrogates import load_model, save_gf, save_lr, save_ns

MODEL_KINDS = ("ns", "lr", "gf")
RUN_VARIANTS = ("detector", "ns", "lr", "gf", "gt")


def _cmd_collect(args) -> int:
    cfg = load_config(args.config)
    dataset = collect(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset(out / "dataset.jsonl", dataset)
    write_manifest(out / "manifest.json", {
        "artifact": "dataset",
        "config_hash": cfg.config_hash(),
        "scenario_seed": cfg.scenario.seed,
        "detector_seed": cfg.detector.seed,
        "runs": cfg.collect.runs,
        "train_scenarios": list(cfg.collect.train_scenarios),
        "test_scenarios": list(cfg.collect.test_scenarios),
        "rows": len(dataset),
        "files": ["dataset.jsonl"],
    })
    print(f"wrote {len(dataset)} tuples to {out / 'dataset.jsonl'}")
    return 0


def _load_split(dataset_dir: Path):
    manifest = read_manifest(dataset_dir / "manifest.json")
    dataset = read_dataset(dataset_dir / "dataset.jsonl")
    return dataset.split_by_scenario(manifest["train_scenarios"],
                                     manifest["test_scenarios"])


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    dataset_dir = Path(args.dataset)
    train_ds, _ = _load_split(dataset_dir)
    model, info = train_model(args.model, train_ds, cfg, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.model == "ns":
        save_ns(out, model)
    elif args.model == "lr":
        save_lr(out, model[0], model[1])
    else:
        save_gf(out, model)
    write_manifest(out.with_suffix(".manifest.json"), {
        "artifact": "model", "kind": args.model, "seed": args.seed,
        "config_hash": cfg.config_hash(), "dataset": str(dataset_dir),
        **info,
    })
    print(f"trained {args.model} on {len(train_ds)} rows -> {out}")
    if info:
        print(json.dumps(info, sort_keys=True))
    return 0


def _load_model_payload(path):
    kind, payload = load_model(path)
    return kind, payload


def _cmd_eval_model(args) -> int:
    dataset_dir = Path(args.dataset)
    _, test_ds = _load_split(dataset_dir)
    reports = [eval_detector(test_ds)]
    for model_path in args.model:
        kind, payload = _load_model_payload(model_path)
        reports.append(eval_model(kind, payload, test_ds, seed=args.seed))
    reports.append(eval_model("gt", None, test_ds, seed=args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "model_metrics.json").write_text(
        json.dumps(reports, sort_keys=True, indent=1))
    lines = ["model,mode,precision,recall,accuracy,spmse"]
    for r in reports:
        for mode in ("vs_gt", "vs_detector"):
            if mode not in r:
                continue
            m = r[mode]
            lines.append(
                f"{r['kind']},{mode},{m['precision']!r},{m['recall']!r},"
                f"{m['accuracy']!r},{m.get('spmse', '')!r}")
    (out / "model_metrics.csv").write_text("\n".join(lines) + "\n")
    for r in reports:
        tag = r["kind"]
        acc = r.get("vs_detector", {}).get("accuracy")
        extra = f" accuracy-vs-detector={acc:.3f}" if acc is not None else ""
        print(f"evaluated {tag}: recall-vs-gt={r['vs_gt']['recall']:.3f}"
              f"{extra}")
    return 0


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    model = None
    if args.variant in MODEL_KINDS:
        if not args.model:
            raise SystemExit(f"--model required for variant {args.variant}")
        kind, model = _load_model_payload(args.model)
        if kind != args.variant:
            raise SystemExit(
                f"model kind {kind} does not match variant {args.variant}")
    out = Path(args.out)
    for seed in args.seeds:
        result = run_behaviour(cfg, args.variant, seed, model=model)
        run_dir = out / f"{args.variant}_seed{seed}"
        run_dir.mkdir(parents=True, exist_ok=True)
        write_jsonl(run_dir / "trace.jsonl", result.trace_rows)
        (run_dir / "timing.json").write_text(
            json.dumps(result.timing.medians(), sort_keys=True))
        write_manifest(run_dir / "manifest.json", {
            "artifact": "trace", "variant": args.variant, "seed": seed,
            "config_hash": cfg.config_hash(),
            "truncated": result.truncated,
            "files": ["trace.jsonl", "timing.json"],
        })
        print(f"ran {args.variant} seed {seed}: "
              f"{len(result.trace_rows)} steps, "
              f"truncated={result.truncated}")
    return 0


def _cmd_compare(args) -> int:
    runs_dir = Path(args.runs)
    traces: dict[str, dict[int, object]] = {}
    timing: dict[str, dict] = {}
    for manifest_path in sorted(runs_dir.glob("*/manifest.json")):
        m = read_manifest(manifest_path)
        if m.get("artifact") != "trace":
            continue
        run_dir = manifest_path.parent
        variant, seed = m["variant"], m["seed"]
        traces.setdefault(variant, {})[seed] = read_trace(
            run_dir / "trace.jsonl")
        timing[variant] = json.loads((run_dir / "timing.json").read_text())
    if len(traces) < 2:
        raise SystemExit("compare needs runs from at least two variants")
    common_seeds = sorted(set.intersection(
        *(set(d.keys()) for d in traces.values())))
    if not common_seeds:
        raise SystemExit("no common seeds across variants")
    by_variant = {v: [traces[v][s] for s in common_seeds] for v in traces}
    report = compare_runs(by_variant)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_compare_csv(report, out)
    (out / "summary.md").write_text(markdown_summary(report, timing=timing))
    print(f"compared variants {sorted(traces)} over seeds {common_seeds}")
    print(f"reports in {out}")
    return 0


def _cmd_report(args) -> int:
    base = Path(args.dir)
    eval_reports = None
    metrics_file = base / "model_metrics.json"
    if metrics_file.exists():
        eval_reports = json.loads(metrics_file.read_text())
    summary = base / "summary.md"
    if summary.exists() and eval_reports:
        text = summary.read_text()
        print(text)
    merged = base / "report.md"
    parts = []
    if eval_reports is not None:
        parts.append("# Model-level metrics\n")
        parts.append("```json")
        parts.append(json.dumps(eval_reports, sort_keys=True, indent=1))
        parts.append("```\n")
    if summary.exists():
        parts.append(summary.read_text())
    if not parts:
        raise SystemExit(f"nothing to report in {base}")
    merged.write_text("\n".join(parts))
    print(f"wrote {merged}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pemsim",
        description="2D driving micro-simulator with perception error models")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="collect training tuples")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_collect)

    p = sub.add_parser("train", help="train a surrogate model")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", required=True,
                   help="directory produced by collect")
    p.add_argument("--model", required=True, choices=MODEL_KINDS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model file to write (.json)")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval-model", help="score models on held-out data")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", nargs="*", default=[],
                   help="model files to evaluate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_eval_model)

    p = sub.add_parser("run", help="closed-loop behaviour runs")
    p.add_argument("--config", required=True)
    p.add_argument("--variant", required=True, choices=RUN_VARIANTS)
    p.add_argument("--model", default=None)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("compare", help="pairwise behaviour comparison")
    p.add_argument("--runs", required=True, help="directory of run outputs")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_compare)

    p = sub.add_parser("report", help="assemble a markdown report")
    p.add_argument("--dir", required=True)
    p.set_defaults(fn=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
