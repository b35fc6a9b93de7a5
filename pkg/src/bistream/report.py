"""CSV writers with fixed column order, and matplotlib figures over the same rows."""

from __future__ import annotations

import csv
import math
import os
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import ADMISSION_COLUMNS, BENCH_COLUMNS, BENCH_STRATEGIES, METRIC_COLUMNS, RUN_COLUMNS, SUMMARY_COLUMNS


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else ("-inf" if v < 0 else "nan"))
    return str(v)


def write_csv(path: str, columns: Sequence[str], rows: Iterable[dict]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in columns])


def read_csv(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_metrics(out_dir: str, rows: Sequence[dict], summaries: Sequence[dict]) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, "metrics.csv"), os.path.join(out_dir, "summary.csv")]
    write_csv(paths[0], RUN_COLUMNS, rows)
    write_csv(paths[1], SUMMARY_COLUMNS, summaries)
    return paths


def write_admissions(out_dir: str, rows: Sequence[dict]) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "admission.csv")
    write_csv(path, ADMISSION_COLUMNS, rows)
    return path


def write_benchmark(out_dir: str, rows: Sequence[dict], summary: Sequence[dict]) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, "bench.csv"), os.path.join(out_dir, "bench_summary.csv")]
    write_csv(paths[0], BENCH_COLUMNS, rows)
    write_csv(paths[1], ("size", "strategy", "instances", "found", "mean_ratio", "mean_map_messages"), summary)
    return paths


# -- figures ------------------------------------------------------------------

_LABELS = {
    "throughput_mbps": "throughput (Mbps)",
    "acceptance_ratio": "acceptance ratio",
    "cpu_util": "CPU utilization",
    "ded_link_util": "dedicated link utilization",
    "sla_deviation": "SLA deviation",
    "mean_elongation": "elongation",
    "tasks_per_hour": "completed tasks per hour",
}


def plot_runs(out_dir: str, rows: Sequence[dict]) -> str:
    """Bar chart per metric, one bar group per (mode, scheduler), over seeds."""
    groups: dict[str, list[dict]] = {}
    for r in rows:
        groups.setdefault(f"{r['mode']}/{r['scheduler']}", []).append(r)
    metrics = [c for c in METRIC_COLUMNS if c in _LABELS]
    fig, axes = plt.subplots(2, math.ceil(len(metrics) / 2), figsize=(12, 6))
    for ax, c in zip(axes.flat, metrics):
        names = sorted(groups)
        means = [sum(float(r[c]) for r in groups[g]) / len(groups[g]) for g in names]
        ax.bar(range(len(names)), means, color="tab:blue")
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=20, fontsize=7)
        ax.set_title(_LABELS[c], fontsize=9)
    for ax in list(axes.flat)[len(metrics):]:
        ax.axis("off")
    fig.tight_layout()
    path = os.path.join(out_dir, "metrics.png")
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def plot_sweep(out_dir: str, summaries: Sequence[dict], parameter: str) -> list[str]:
    """One line per mode against the swept value, for each metric."""
    paths = []
    modes = sorted({r["mode"] for r in summaries})
    for c in ("acceptance_ratio", "ded_link_util", "sla_deviation", "throughput_mbps", "mean_elongation"):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for mode in modes:
            pts = sorted((float(r["point"]), float(r[c]), float(r[c + "_sd"])) for r in summaries if r["mode"] == mode)
            xs, ys, sd = zip(*pts)
            ax.errorbar(xs, ys, yerr=sd, marker="o", capsize=3, label=mode)
        ax.set_xlabel(parameter)
        ax.set_ylabel(_LABELS[c])
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = os.path.join(out_dir, f"sweep_{c}.png")
        fig.savefig(path, dpi=110)
        plt.close(fig)
        paths.append(path)
    return paths


def plot_benchmark(out_dir: str, summary: Sequence[dict]) -> list[str]:
    paths = []
    kinds = [k for k in BENCH_STRATEGIES if any(r["strategy"] == k for r in summary)]
    for col, label, name in (("mean_ratio", "cost / lower bound", "bench_ratio.png"), ("mean_map_messages", "map messages", "bench_messages.png")):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for k in kinds:
            pts = sorted((r["size"], r[col]) for r in summary if r["strategy"] == k and r[col] is not None)
            if pts:
                ax.plot(*zip(*pts), marker="o", label=k)
        ax.set_xlabel("nodes")
        ax.set_ylabel(label)
        if col == "mean_map_messages":
            ax.set_yscale("log")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = os.path.join(out_dir, name)
        fig.savefig(path, dpi=110)
        plt.close(fig)
        paths.append(path)
    return paths
