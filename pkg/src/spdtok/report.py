"""Aggregation of finished training runs into tables and plot-ready CSV."""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .errors import InvalidSpec, MissingRun
from .stats import mean_std


def load_run(run_dir: str) -> dict:
    metrics_path = os.path.join(run_dir, "metrics.json")
    epochs_path = os.path.join(run_dir, "epochs.csv")
    if not os.path.isfile(metrics_path):
        raise MissingRun(f"{run_dir} has no metrics.json")
    with open(metrics_path, "r", encoding="utf-8") as f:
        metrics = json.load(f)
    wall = []
    if os.path.isfile(epochs_path):
        with open(epochs_path, newline="", encoding="utf-8") as f:
            for row in csv.DictReader(f):
                wall.append(float(row["wall_clock_s"]))
    metrics["wall_clock_s"] = wall
    metrics["run_dir"] = run_dir
    return metrics


def _diff_paths(a, b, prefix=""):
    paths = []
    keys = set(a) | set(b)
    for k in sorted(keys):
        p = f"{prefix}.{k}" if prefix else str(k)
        if k not in a or k not in b:
            paths.append(p)
        elif isinstance(a[k], dict) and isinstance(b[k], dict):
            paths.extend(_diff_paths(a[k], b[k], p))
        elif a[k] != b[k]:
            paths.append(p)
    return paths


def consolidate(run_dirs) -> dict:
    """Merge runs of one experiment (same config, different seeds).

    Refuses to merge runs whose configs differ, listing the differing keys.
    """
    if not run_dirs:
        raise MissingRun("no run directories given")
    runs = [load_run(d) for d in run_dirs]
    base = runs[0]["config"]
    for other in runs[1:]:
        diffs = _diff_paths(base, other["config"])
        if diffs:
            raise InvalidSpec(
                "refusing to merge runs with incompatible configs; differing keys: "
                + ", ".join(diffs))
    finals = [r["final_test_accuracy"] for r in runs]
    mean, std = mean_std(finals)
    wall = [w for r in runs for w in r["wall_clock_s"]]
    return {
        "runs": runs,
        "summary": {
            "n_runs": len(runs),
            "seeds": [r["seed"] for r in runs],
            "final_test_accuracy_mean": mean,
            "final_test_accuracy_std": std,
            "time_per_epoch_s": float(np.mean(wall)) if wall else None,
        },
    }


def markdown_table(consolidated: dict) -> str:
    s = consolidated["summary"]
    time_str = f"{s['time_per_epoch_s']:.3f}s" if s["time_per_epoch_s"] is not None else "n/a"
    lines = [
        "| runs | seeds | final test acc (mean +/- std) | time/epoch |",
        "|---|---|---|---|",
        f"| {s['n_runs']} | {', '.join(str(x) for x in s['seeds'])} "
        f"| {100 * s['final_test_accuracy_mean']:.2f} +/- {100 * s['final_test_accuracy_std']:.2f} "
        f"| {time_str} |",
    ]
    return "\n".join(lines)


def curves_csv(consolidated: dict) -> str:
    cols = ["seed", "epoch", "train_loss", "train_acc", "val_loss", "val_acc",
            "test_loss", "test_acc"]
    out = [",".join(cols)]
    for run in consolidated["runs"]:
        for row in run["epochs"]:
            cells = [str(run["seed"]), str(row["epoch"])]
            cells += [repr(row[c]) for c in cols[2:]]
            out.append(",".join(cells))
    return "\n".join(out) + "\n"
