"""Learning-curve figures and summary tables from one or more run directories.

A run directory is what ``cashlab train`` leaves behind: ``config.txt`` plus
``metrics.csv``. Runs with the same (algo, env, arch) label are treated as
seeds of one experiment and averaged.
"""

from __future__ import annotations

import csv
import os
from collections import OrderedDict

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .arch import count_params  # noqa: E402
from .config import arch_config_from, load_config  # noqa: E402
from .evalmetrics import MetricError  # noqa: E402

METRICS_HEADER = ["env_steps", "update", "return_mean", "return_std",
                  "test_return_mean", "success_rate_id", "success_rate_ood",
                  "snd", "loss", "lr", "eps_or_beta"]
PLOT_METRICS = ["return_mean", "test_return_mean", "success_rate_id",
                "success_rate_ood", "snd", "loss"]
DOWNSAMPLE_POINTS = 200
ROLLING_WINDOW = 10


def load_metrics(path) -> dict:
    """metrics.csv -> {column: float array}."""
    with open(path) as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def load_run(run_dir) -> dict:
    cfg = load_config(os.path.join(run_dir, "config.txt"))
    metrics = load_metrics(os.path.join(run_dir, "metrics.csv"))
    return {"dir": run_dir, "config": cfg, "metrics": metrics,
            "label": f"{cfg['algo']}/{cfg['env']}/{cfg['arch']}"}


def downsample(values: np.ndarray, points: int = DOWNSAMPLE_POINTS) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape[0] <= points:
        return values
    idx = np.linspace(0, values.shape[0] - 1, points).round().astype(int)
    return values[idx]


def rolling_mean(values: np.ndarray, window: int = ROLLING_WINDOW) -> np.ndarray:
    """Running average with a growing window at the start.

    A constant series stays exactly constant under this smoothing.
    """
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    csum = np.cumsum(values)
    for i in range(values.shape[0]):
        lo = max(0, i - window + 1)
        out[i] = (csum[i] - (csum[lo - 1] if lo > 0 else 0.0)) / (i - lo + 1)
    return out


def curve(runs, metric: str):
    """Mean and std over seeds, then downsampled and smoothed.

    Returns (steps, mean, std); runs are truncated to the shortest one so the
    seed axis lines up row by row.
    """
    for run in runs:
        if metric not in run["metrics"]:
            raise MetricError(
                f"{run['dir']}: no metric column {metric!r}; available: "
                + ", ".join(sorted(run["metrics"])))
    n = min(run["metrics"][metric].shape[0] for run in runs)
    stackv = np.stack([run["metrics"][metric][:n] for run in runs])
    steps = runs[0]["metrics"]["env_steps"][:n]
    mean, std = stackv.mean(axis=0), stackv.std(axis=0)
    steps = downsample(steps)
    mean = rolling_mean(downsample(mean))
    std = rolling_mean(downsample(std))
    return steps, mean, std


def group_runs(runs) -> "OrderedDict[str, list]":
    groups = OrderedDict()
    for run in runs:
        groups.setdefault(run["label"], []).append(run)
    return groups


def plot_metric(groups, metric: str, out_path):
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, runs in groups.items():
        steps, mean, std = curve(runs, metric)
        ax.plot(steps, mean, label=f"{label} (n={len(runs)})")
        ax.fill_between(steps, mean - std, mean + std, alpha=0.25)
    ax.set_xlabel("environment steps")
    ax.set_ylabel(metric)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, format="svg")
    plt.close(fig)


def summary_rows(groups):
    """Final-point success and diversity per experiment, Table-style."""
    rows = []
    for label, runs in groups.items():
        finals = {m: np.array([run["metrics"][m][-1] for run in runs])
                  for m in ("success_rate_id", "success_rate_ood", "snd")}
        rows.append({
            "experiment": label, "seeds": len(runs),
            "success_id_mean": float(finals["success_rate_id"].mean()),
            "success_id_std": float(finals["success_rate_id"].std()),
            "success_ood_mean": float(finals["success_rate_ood"].mean()),
            "success_ood_std": float(finals["success_rate_ood"].std()),
            "snd_mean": float(finals["snd"].mean()),
            "snd_std": float(finals["snd"].std()),
        })
    return rows


def param_rows(groups):
    rows = []
    counts = {}
    for label, runs in groups.items():
        n = count_params(arch_config_from(runs[0]["config"]))
        counts[label] = n
        rows.append({"experiment": label, "parameters": n})
    for label, n in counts.items():
        if label.endswith("/cash"):
            ref = label[: -len("cash")] + "rnn_exp"
            if ref in counts:
                rows.append({"experiment": f"{label} vs {ref}",
                             "parameters": round(n / counts[ref], 6)})
    return rows


def _write_csv(path, rows):
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def build_report(run_dirs, out_dir, metrics=None) -> dict:
    """Render figures and tables; returns the written file paths."""
    runs = [load_run(d) for d in run_dirs]
    groups = group_runs(runs)
    os.makedirs(out_dir, exist_ok=True)
    written = {"figures": [], "tables": []}
    for metric in metrics or PLOT_METRICS:
        out_path = os.path.join(out_dir, f"{metric}.svg")
        plot_metric(groups, metric, out_path)
        written["figures"].append(out_path)
    summary = os.path.join(out_dir, "summary.csv")
    _write_csv(summary, summary_rows(groups))
    params = os.path.join(out_dir, "parameters.csv")
    _write_csv(params, param_rows(groups))
    written["tables"] = [summary, params]
    return written
