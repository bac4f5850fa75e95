"""Cross-variant behaviour comparison and report emission."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..metrics import (TrajectoryTrace, collision_interval_cdf, max_eucl_position,
                       max_eucl_velocity, mba_tmba, mean_eucl_position,
                       mean_eucl_velocity, normalized_pairwise_table)

PAIR_METRICS = {
    "mean_eucl_position": mean_eucl_position,
    "mean_eucl_velocity": mean_eucl_velocity,
    "max_eucl_position": max_eucl_position,
    "max_eucl_velocity": max_eucl_velocity,
}
REFERENCE_PAIR = ("gt", "detector")


def compare_runs(traces: dict[str, list[TrajectoryTrace]]) -> dict:
    """Pairwise trace metrics (seed-averaged), braking summaries and the
    pooled collision CDF for every variant.

    Values are normalized by the (gt, detector) entry when both variants
    are present.
    """
    variants = list(traces)
    if len(variants) < 2:
        raise ValueError("need at least two variants to compare")
    n_seeds = min(len(v) for v in traces.values())

    tables: dict[str, dict] = {}
    for name, fn in PAIR_METRICS.items():
        table = {}
        for a in variants:
            for b in variants:
                if a == b:
                    table[(a, b)] = 0.0
                    continue
                vals = [fn(traces[a][s], traces[b][s]) for s in range(n_seeds)]
                table[(a, b)] = float(np.mean(vals))
        entry = {"raw": table}
        if REFERENCE_PAIR[0] in variants and REFERENCE_PAIR[1] in variants \
                and table[REFERENCE_PAIR] > 0.0:
            entry["normalized"] = normalized_pairwise_table(table,
                                                            REFERENCE_PAIR)
        tables[name] = entry

    braking = {}
    for v in variants:
        summaries = [mba_tmba(tr) for tr in traces[v]]
        braking[v] = {
            "mba": [s.mba for s in summaries],
            "tmba": [s.tmba for s in summaries],
            "mba_mean": float(np.mean([s.mba for s in summaries])),
            "tmba_mean": float(np.mean([s.tmba for s in summaries])),
            "braked": [s.braked for s in summaries],
        }

    cdfs = {}
    for v in variants:
        gaps, cdf, median = collision_interval_cdf(
            [list(tr.collision_times) for tr in traces[v]])
        cdfs[v] = {"gaps": gaps.tolist(), "cdf": cdf.tolist(),
                   "median": median}

    return {"variants": variants, "seeds": n_seeds, "pairwise": tables,
            "braking": braking, "collision_cdf": cdfs}


def write_compare_csv(report: dict, outdir) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    lines = ["metric,variant_a,variant_b,value,normalized"]
    for name, entry in report["pairwise"].items():
        raw = entry["raw"]
        norm = entry.get("normalized", {})
        for (a, b), value in sorted(raw.items()):
            nv = norm.get((a, b), "")
            lines.append(f"{name},{a},{b},{value!r},{nv!r}" if nv != ""
                         else f"{name},{a},{b},{value!r},")
    (outdir / "pairwise.csv").write_text("\n".join(lines) + "\n")

    lines = ["variant,seed,mba,tmba"]
    for v, entry in report["braking"].items():
        for s, (mba, tmba) in enumerate(zip(entry["mba"], entry["tmba"])):
            lines.append(f"{v},{s},{mba!r},{tmba!r}")
    (outdir / "braking.csv").write_text("\n".join(lines) + "\n")

    for v, entry in report["collision_cdf"].items():
        lines = ["gap_seconds,cumulative_fraction"]
        for g, c in zip(entry["gaps"], entry["cdf"]):
            lines.append(f"{g!r},{c!r}")
        (outdir / f"collision_cdf_{v}.csv").write_text("\n".join(lines) + "\n")


def _fmt(x: float) -> str:
    return f"{x:.3g}"


def markdown_summary(report: dict,
                     eval_reports: list[dict] | None = None,
                     timing: dict | None = None) -> str:
    """Human-readable summary of behaviour (and optionally model-level)
    results, laid out as pairwise tables per metric."""
    variants = report["variants"]
    out = ["# Run comparison", ""]
    if eval_reports:
        out += ["## Model-level metrics (within 50 m)", "",
                "| model | precision vs GT | recall vs GT | spMSE | "
                "accuracy vs det | recall vs det | precision vs det |",
                "|---|---|---|---|---|---|---|"]
        for r in eval_reports:
            g = r["vs_gt"]
            d = r.get("vs_detector")
            row = (f"| {r['kind']} | {_fmt(g['precision'])} | "
                   f"{_fmt(g['recall'])} | {_fmt(g['spmse'])} | ")
            row += (f"{_fmt(d['accuracy'])} | {_fmt(d['recall'])} | "
                    f"{_fmt(d['precision'])} |" if d else " | | |")
            out.append(row)
        out.append("")
    out += ["## Braking", "", "| variant | MBA | tMBA (s) |", "|---|---|---|"]
    for v in variants:
        b = report["braking"][v]
        out.append(f"| {v} | {_fmt(b['mba_mean'])} | {_fmt(b['tmba_mean'])} |")
    out.append("")
    for name, entry in report["pairwise"].items():
        table = entry.get("normalized", entry["raw"])
        suffix = " (normalized)" if "normalized" in entry else ""
        out += [f"## {name}{suffix}", "",
                "| | " + " | ".join(variants) + " |",
                "|" + "---|" * (len(variants) + 1)]
        for a in variants:
            cells = [_fmt(table[(a, b)]) for b in variants]
            out.append(f"| {a} | " + " | ".join(cells) + " |")
        out.append("")
    medians = {v: e["median"] for v, e in report["collision_cdf"].items()}
    out += ["## Median time between collisions (s)", ""]
    for v in variants:
        m = medians[v]
        out.append(f"- {v}: {'n/a' if np.isnan(m) else _fmt(m)}")
    out.append("")
    if timing:
        out += ["## Timing (median seconds per frame)", "",
                "| variant | perception (DTPF) | whole loop (TTPF) |",
                "|---|---|---|"]
        for v, med in timing.items():
            out.append(f"| {v} | {med['dtpf']:.2e} | {med['ttpf']:.2e} |")
        out.append("")
    return "\n".join(out)
